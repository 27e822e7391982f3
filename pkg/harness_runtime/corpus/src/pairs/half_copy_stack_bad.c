#include <string.h>

int sf_half_copy_stack_bad(const char *s)
{
    char acc[16];
    size_t half = strlen(s) / 2;
    memcpy(acc, s, half); /* WARN */
    return half ? acc[0] : 0;
}
