#include "byte_cursor.h"

#include <stdlib.h>
#include <string.h>

void sf_cursor_init(sf_cursor *c, const uint8_t *data, size_t len) {
    c->base = data;
    c->len = data ? len : 0;
    c->off = 0;
}

size_t sf_cursor_remaining(const sf_cursor *c) {
    return c->len - c->off;
}

int sf_take_scalar(sf_cursor *c, void *out, size_t width) {
    if (sf_cursor_remaining(c) < width)
        return 0;
    memcpy(out, c->base + c->off, width);
    c->off += width;
    return 1;
}

int sf_take_u8(sf_cursor *c, uint8_t *out) { return sf_take_scalar(c, out, 1); }
int sf_take_u16(sf_cursor *c, uint16_t *out) { return sf_take_scalar(c, out, 2); }
int sf_take_u32(sf_cursor *c, uint32_t *out) { return sf_take_scalar(c, out, 4); }
int sf_take_u64(sf_cursor *c, uint64_t *out) { return sf_take_scalar(c, out, 8); }

size_t sf_take_bytes(sf_cursor *c, uint8_t *dst, size_t want) {
    size_t have = sf_cursor_remaining(c);
    size_t n = want < have ? want : have;
    if (n)
        memcpy(dst, c->base + c->off, n);
    c->off += n;
    return n;
}

char *sf_take_cstring(sf_cursor *c, size_t want) {
    char *buf = malloc(want + 1);
    if (!buf)
        return NULL;
    size_t got = sf_take_bytes(c, (uint8_t *)buf, want);
    buf[got] = '\0';
    return buf;
}

size_t sf_count_from_header(uint64_t raw, size_t cap) {
    if (cap < 2)
        return 1;
    return 1 + (size_t)(raw % (uint64_t)(cap - 1));
}
