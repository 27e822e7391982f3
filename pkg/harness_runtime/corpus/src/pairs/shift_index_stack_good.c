int sf_shift_index_stack_good(int x)
{
    char b[16];
    unsigned idx = ((unsigned)x << 1) % sizeof(b);
    b[0] = 0;
    b[idx] = 2; /* WARN */
    return b[0];
}
