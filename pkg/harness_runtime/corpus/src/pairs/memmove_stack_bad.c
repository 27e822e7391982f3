#include <string.h>

int sf_memmove_stack_bad(const char *s)
{
    char t[12];
    memmove(t, s, strlen(s)); /* WARN */
    return t[0];
}
