#include <string.h>

size_t sf_gate_copy_limit = 5;

void sf_gate_raise(size_t v)
{
    sf_gate_copy_limit = v;
}

int sf_global_gate_bad(const char *s)
{
    char window[8];
    size_t n = strlen(s);
    if (n > sf_gate_copy_limit)
        n = sf_gate_copy_limit;
    memcpy(window, s, n); /* WARN */
    return n ? window[0] : 0;
}
