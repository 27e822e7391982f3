#include <string.h>

int sf_memcpy_stack_good(const char *s)
{
    char dst[16];
    size_t n = strlen(s);
    if (n > sizeof(dst))
        n = sizeof(dst);
    memcpy(dst, s, n); /* WARN */
    return n ? dst[0] : 0;
}
