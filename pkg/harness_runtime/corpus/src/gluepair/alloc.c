#include <stdlib.h>

static size_t alloc_count;

void *CRYPTO_malloc(size_t num)
{
    if (num == 0)
        return NULL;
    alloc_count++;
    return malloc(num);
}

void *OPENSSL_malloc(size_t num)
{
    return CRYPTO_malloc(num);
}

void *sf_alloc_zeroed(size_t num)
{
    return calloc(1, num);
}

size_t sf_alloc_stats(void)
{
    return alloc_count;
}
