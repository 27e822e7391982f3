#include <string.h>

int sf_index_loop_stack_good(const char *s)
{
    char t[16];
    size_t i;
    for (i = 0; i < sizeof(t) - 1 && s[i]; i++)
        t[i] = s[i]; /* WARN */
    t[i] = '\0';
    return t[0];
}
