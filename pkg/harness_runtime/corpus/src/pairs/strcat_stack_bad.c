#include <string.h>

int sf_strcat_stack_bad(const char *s)
{
    char buf[24];
    strcpy(buf, "id=");
    strcat(buf, s); /* WARN */
    return buf[3];
}
