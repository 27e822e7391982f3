#include <stdio.h>

int sf_int_render_stack_good(int v)
{
    char out[6];
    snprintf(out, sizeof(out), "%d", v); /* WARN */
    return out[0];
}
