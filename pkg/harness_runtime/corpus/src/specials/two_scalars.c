unsigned sf_two_scalars_good(unsigned a, unsigned b)
{
    unsigned mix = (a & 0xffffu) ^ (b << 1); /* WARN */
    return mix;
}
