#include <string.h>

int sf_memset_len_uint_good(unsigned n)
{
    char b[20];
    memset(b, 7, n % (sizeof(b) + 1)); /* WARN */
    return b[0];
}
