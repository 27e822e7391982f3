#include <stdio.h>

int sf_sprintf_stack_bad(const char *s)
{
    char out[24];
    sprintf(out, "v=%s", s); /* WARN */
    return out[0];
}
