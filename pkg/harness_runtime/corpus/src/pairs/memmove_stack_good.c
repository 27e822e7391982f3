#include <string.h>

int sf_memmove_stack_good(const char *s)
{
    char t[12];
    size_t n = strlen(s);
    if (n > sizeof(t))
        n = sizeof(t);
    memmove(t, s, n); /* WARN */
    return n ? t[0] : 0;
}
