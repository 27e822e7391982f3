int sf_shift_index_stack_bad(int x)
{
    char b[16];
    unsigned idx = ((unsigned)x << 1) % 40;
    b[0] = 0;
    b[idx] = 2; /* WARN */
    return b[0];
}
