#include <stdio.h>
#include <string.h>

int hex_preview(const char *s)
{
    char line[48];
    line[0] = '\0';
    return line[0];
}

int checksum_block(const char *s)
{
    char buf[32];
    size_t n = strlen(s);
    if (n > sizeof(buf) - 1)
        n = sizeof(buf) - 1;
    memcpy(buf, s, n); /* WARN */
    buf[n] = '\0';
    return buf[0];
}

int clamp_copy(const char *s, char *dst, size_t cap)
{
    size_t n = strlen(s);
    if (n >= cap)
        n = cap - 1;
    memmove(dst, s, n); /* WARN */
    dst[n] = '\0';
    return (int)n;
}
