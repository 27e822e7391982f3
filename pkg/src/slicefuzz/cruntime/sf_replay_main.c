/* Standalone corpus replay driver: feeds each file named on the command line
 * through the fuzzing entry point and rewrites the coverage dump after every
 * input, so a crashing input loses only its own coverage. Compiled WITHOUT
 * instrumentation. */
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>

int LLVMFuzzerTestOneInput(const uint8_t *data, size_t size);
void slicefuzz_cov_dump(void);

int main(int argc, char **argv) {
    for (int i = 1; i < argc; i++) {
        FILE *f = fopen(argv[i], "rb");
        if (!f)
            continue;
        if (fseek(f, 0, SEEK_END) != 0) {
            fclose(f);
            continue;
        }
        long n = ftell(f);
        fseek(f, 0, SEEK_SET);
        size_t len = n > 0 ? (size_t)n : 0;
        uint8_t *buf = malloc(len ? len : 1);
        if (!buf) {
            fclose(f);
            continue;
        }
        if (len && fread(buf, 1, len, f) != len) {
            fclose(f);
            free(buf);
            continue;
        }
        fclose(f);
        LLVMFuzzerTestOneInput(buf, len);
        free(buf);
        slicefuzz_cov_dump();
    }
    return 0;
}
