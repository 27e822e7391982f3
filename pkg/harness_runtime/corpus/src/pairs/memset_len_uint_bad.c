#include <string.h>

int sf_memset_len_uint_bad(unsigned n)
{
    char b[20];
    memset(b, 7, n % 64); /* WARN */
    return b[0];
}
