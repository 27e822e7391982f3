int sf_stack_fill_uint_bad(unsigned n)
{
    char b[24];
    unsigned i, top = n % 64;
    for (i = 0; i < top; i++)
        b[i] = 'x'; /* WARN */
    return top ? b[0] : 0;
}
