#include <string.h>

int sf_strncat_bound_bad(const char *s)
{
    char buf[16];
    buf[0] = '\0';
    strncat(buf, s, sizeof(buf)); /* WARN */
    return buf[0];
}
