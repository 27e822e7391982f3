int sf_byte_sanitize_self_good(const char *s)
{
    char b[8];
    unsigned i;
    for (i = 0; i + 1 < sizeof(b) && s[i]; i++)
        b[i] = (char)(s[i] | 0x20); /* WARN */
    b[i] = 0;
    return b[0];
}
