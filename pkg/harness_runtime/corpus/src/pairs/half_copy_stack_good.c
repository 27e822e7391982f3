#include <string.h>

int sf_half_copy_stack_good(const char *s)
{
    char acc[16];
    size_t half = strlen(s) / 2;
    if (half > sizeof(acc))
        half = sizeof(acc);
    memcpy(acc, s, half); /* WARN */
    return half ? acc[0] : 0;
}
