#include <stdlib.h>
#include <string.h>

int sf_loop_copy_heap_bad(const char *s)
{
    size_t i, n = strlen(s);
    char *d = malloc(n ? n : 1);
    int r;
    if (!d)
        return 0;
    for (i = 0; i <= n; i++)
        d[i] = s[i]; /* WARN */
    r = d[0];
    free(d);
    return r;
}
