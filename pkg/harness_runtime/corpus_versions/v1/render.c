#include <stdio.h>
#include <string.h>

int render_label(const char *name)
{
    char out[64];
    snprintf(out, sizeof(out), "[%s]", name); /* WARN */
    return out[0];
}

int render_pair(const char *a, const char *b)
{
    char out[96];
    snprintf(out, sizeof(out), "%s=%s", a, b); /* WARN */
    return out[0];
}

int copy_tail(const char *s)
{
    char tail[16];
    size_t n = strlen(s);
    const char *from = n > 8 ? s + n - 8 : s;
    memcpy(tail, from, strlen(from) + 1); /* WARN */
    return tail[0];
}
