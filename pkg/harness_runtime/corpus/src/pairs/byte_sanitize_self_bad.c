int sf_byte_sanitize_self_bad(const char *s)
{
    char b[8];
    unsigned i;
    for (i = 0; s[i] && i < 16; i++)
        b[i] = (char)(s[i] | 0x20); /* WARN */
    return i ? b[0] : 0;
}
