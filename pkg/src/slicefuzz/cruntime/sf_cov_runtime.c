/* Per-block execution counting for coverage replay binaries.
 *
 * Slice and harness objects are compiled with
 * -fsanitize-coverage=trace-pc-guard,pc-table. Each translation unit
 * registers its own guard and pc-table subranges through a module
 * constructor, in matching order, so guard numbering here runs across
 * modules in registration order and the dump walks the pc ranges the same
 * way. Dumps one "pc flags count" line per block with pc rebased to the
 * executable's load address. This file itself must be compiled WITHOUT
 * instrumentation.
 */
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#define SF_MAX_MODULES 256

static struct {
    const uintptr_t *beg;
    const uintptr_t *end;
} sf_pc_ranges[SF_MAX_MODULES];
static int sf_n_pc_ranges;

static uint32_t sf_n_guards;
static uint64_t *sf_counts;
static uint32_t sf_counts_cap;

void __sanitizer_cov_trace_pc_guard_init(uint32_t *start, uint32_t *stop) {
    if (start == stop || *start)
        return;
    uint32_t need = sf_n_guards + (uint32_t)(stop - start) + 1;
    if (need > sf_counts_cap) {
        uint32_t cap = sf_counts_cap ? sf_counts_cap : 1024;
        while (cap < need)
            cap *= 2;
        uint64_t *grown = realloc(sf_counts, cap * sizeof(uint64_t));
        if (!grown)
            return;
        memset(grown + sf_counts_cap, 0, (cap - sf_counts_cap) * sizeof(uint64_t));
        sf_counts = grown;
        sf_counts_cap = cap;
    }
    for (uint32_t *g = start; g < stop; g++)
        *g = ++sf_n_guards;
}

void __sanitizer_cov_pcs_init(const uintptr_t *beg, const uintptr_t *end) {
    if (sf_n_pc_ranges < SF_MAX_MODULES) {
        sf_pc_ranges[sf_n_pc_ranges].beg = beg;
        sf_pc_ranges[sf_n_pc_ranges].end = end;
        sf_n_pc_ranges++;
    }
}

void __sanitizer_cov_trace_pc_guard(uint32_t *guard) {
    uint32_t i = *guard;
    if (i && sf_counts && i <= sf_n_guards)
        sf_counts[i]++;
}

void slicefuzz_cov_dump(void) {
    const char *path = getenv("SLICEFUZZ_COV_OUT");
    if (!path || !sf_counts)
        return;
    FILE *f = fopen(path, "w");
    if (!f)
        return;
    extern char __executable_start;
    uintptr_t base = (uintptr_t)&__executable_start;
    uint32_t g = 1;
    for (int r = 0; r < sf_n_pc_ranges; r++) {
        uint32_t n_pcs = (uint32_t)((sf_pc_ranges[r].end - sf_pc_ranges[r].beg) / 2);
        for (uint32_t i = 0; i < n_pcs && g <= sf_n_guards; i++, g++) {
            uintptr_t pc = sf_pc_ranges[r].beg[2 * i] - base;
            uintptr_t flags = sf_pc_ranges[r].beg[2 * i + 1];
            fprintf(f, "0x%lx %lu %llu\n", (unsigned long)pc, (unsigned long)flags,
                    (unsigned long long)sf_counts[g]);
        }
    }
    fclose(f);
}
