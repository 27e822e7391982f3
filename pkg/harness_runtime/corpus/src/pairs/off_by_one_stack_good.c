#include <string.h>

int sf_off_by_one_stack_good(const char *s)
{
    char t[8];
    size_t n = strlen(s);
    if (n < sizeof(t)) {
        memcpy(t, s, n);
        t[n] = '\0'; /* WARN */
        return t[0];
    }
    return 0;
}
