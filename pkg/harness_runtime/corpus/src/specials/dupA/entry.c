/* Depends on side_foo/side_bar without prototypes; reference discovery has
 * to go through the compiler log. */
int sf_dup_entry(const char *s)
{
    int a = side_foo((int)(unsigned char)s[0]);
    int b = side_bar(a);
    char tag[8];
    tag[(unsigned)(a + b) % 8] = 1; /* WARN */
    return tag[(unsigned)(a + b) % 8];
}
