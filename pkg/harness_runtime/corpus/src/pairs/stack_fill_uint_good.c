int sf_stack_fill_uint_good(unsigned n)
{
    char b[24];
    unsigned i, top = n % 24;
    for (i = 0; i < top; i++)
        b[i] = 'x'; /* WARN */
    return top ? b[0] : 0;
}
