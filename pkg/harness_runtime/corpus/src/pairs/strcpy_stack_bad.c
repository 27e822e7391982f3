#include <string.h>

int sf_strcpy_stack_bad(const char *s)
{
    char buf[16];
    strcpy(buf, s); /* WARN */
    return buf[0];
}
