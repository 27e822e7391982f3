#include <stdio.h>

int sf_sprintf_stack_good(const char *s)
{
    char out[24];
    snprintf(out, sizeof(out), "v=%s", s); /* WARN */
    return out[0];
}
