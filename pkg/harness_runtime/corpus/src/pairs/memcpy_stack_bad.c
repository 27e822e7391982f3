#include <string.h>

int sf_memcpy_stack_bad(const char *s)
{
    char dst[16];
    memcpy(dst, s, strlen(s)); /* WARN */
    return dst[0];
}
