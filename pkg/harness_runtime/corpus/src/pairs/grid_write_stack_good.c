int sf_grid_write_stack_good(int r, int c)
{
    char grid[4][4];
    unsigned rr = (unsigned)r % 4;
    unsigned cc = (unsigned)c % 4;
    grid[0][0] = 0;
    grid[rr][cc] = 1; /* WARN */
    return grid[0][0];
}
