#include <string.h>

int sf_word_copy_stack_bad(const char *s)
{
    int w[4];
    size_t n = strlen(s);
    size_t k = n / 4 + 1;
    size_t i;
    for (i = 0; i < k && i < 8; i++)
        w[i] = (int)i; /* WARN */
    return w[0];
}
