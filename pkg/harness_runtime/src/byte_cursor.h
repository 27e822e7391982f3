/* Bounded byte-cursor reader shared by generated fuzzing harnesses.
 *
 * Every take_* either consumes exactly the requested bytes and advances the
 * offset, or reports exhaustion and leaves the cursor untouched. Nothing here
 * ever reads past base[len).
 */
#ifndef SF_BYTE_CURSOR_H
#define SF_BYTE_CURSOR_H

#include <stddef.h>
#include <stdint.h>

typedef struct sf_cursor {
    const uint8_t *base;
    size_t len;
    size_t off;
} sf_cursor;

void sf_cursor_init(sf_cursor *c, const uint8_t *data, size_t len);
size_t sf_cursor_remaining(const sf_cursor *c);

/* Little-endian fixed-width scalars. Return 1 on success, 0 on exhaustion. */
int sf_take_u8(sf_cursor *c, uint8_t *out);
int sf_take_u16(sf_cursor *c, uint16_t *out);
int sf_take_u32(sf_cursor *c, uint32_t *out);
int sf_take_u64(sf_cursor *c, uint64_t *out);
int sf_take_scalar(sf_cursor *c, void *out, size_t width);

/* Copies up to want bytes (short read on exhaustion is fine); returns the
 * number copied. */
size_t sf_take_bytes(sf_cursor *c, uint8_t *dst, size_t want);

/* Allocates want+1 bytes, fills from the cursor (short read allowed) and
 * NUL-terminates. Caller frees. Never returns NULL except on malloc failure. */
char *sf_take_cstring(sf_cursor *c, size_t want);

/* Maps a raw count header to 1..cap, mirroring the 1 + |value| convention. */
size_t sf_count_from_header(uint64_t raw, size_t cap);

#endif
