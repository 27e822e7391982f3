#include <string.h>

int sf_strcpy_stack_good(const char *s)
{
    char buf[16];
    size_t n = strlen(s);
    if (n > sizeof(buf) - 1)
        n = sizeof(buf) - 1;
    memcpy(buf, s, n); /* WARN */
    buf[n] = '\0';
    return buf[0];
}
