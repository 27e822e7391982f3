#include <string.h>

int sf_ret_index_stack_bad(const char *s)
{
    char t[8];
    memset(t, 0, sizeof(t));
    return t[(unsigned char)s[0] % 16]; /* WARN */
}
