#include <stdio.h>

int sf_int_render_stack_bad(int v)
{
    char out[6];
    sprintf(out, "%d", v); /* WARN */
    return out[0];
}
