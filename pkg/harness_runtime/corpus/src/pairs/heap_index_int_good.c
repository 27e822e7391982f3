#include <stdlib.h>

int sf_heap_index_int_good(int idx)
{
    char *d = calloc(16, 1);
    char r;
    if (!d)
        return 0;
    d[(unsigned)idx % 16] = 'A'; /* WARN */
    r = d[0];
    free(d);
    return r;
}
