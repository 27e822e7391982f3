#include <stdlib.h>
#include <string.h>

int sf_memcpy_heap_good(const char *s)
{
    size_t n = strlen(s);
    char *d = malloc(n + 1);
    int r;
    if (!d)
        return 0;
    memcpy(d, s, n + 1); /* WARN */
    r = d[0];
    free(d);
    return r;
}
