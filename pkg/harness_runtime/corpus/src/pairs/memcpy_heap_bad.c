#include <stdlib.h>
#include <string.h>

int sf_memcpy_heap_bad(const char *s)
{
    char *d = malloc(16);
    int r;
    if (!d)
        return 0;
    memcpy(d, s, strlen(s) + 1); /* WARN */
    r = d[0];
    free(d);
    return r;
}
