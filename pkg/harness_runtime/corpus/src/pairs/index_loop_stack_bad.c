#include <string.h>

int sf_index_loop_stack_bad(const char *s)
{
    char t[16];
    size_t i, n = strlen(s);
    for (i = 0; i <= n; i++)
        t[i] = s[i]; /* WARN */
    return t[0];
}
