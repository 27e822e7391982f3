#include <stdlib.h>

int sf_heap_index_uint_good(unsigned n)
{
    char *p = malloc(32);
    char r;
    if (!p)
        return 0;
    p[n % 32] = 1; /* WARN */
    r = p[0];
    free(p);
    return r;
}
