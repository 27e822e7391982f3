#include <stdlib.h>
#include <string.h>

int sf_dup_copy_heap_bad(const char *s)
{
    size_t n = strlen(s);
    char *d = malloc(n ? n : 1);
    int r;
    if (!d)
        return 0;
    memcpy(d, s, n + 1); /* WARN */
    r = d[0];
    free(d);
    return r;
}
