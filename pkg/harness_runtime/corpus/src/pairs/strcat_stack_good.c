#include <string.h>

int sf_strcat_stack_good(const char *s)
{
    char buf[24];
    strcpy(buf, "id=");
    if (strlen(s) < sizeof(buf) - 4)
        strcat(buf, s); /* WARN */
    return buf[3];
}
