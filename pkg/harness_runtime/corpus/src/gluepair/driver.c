#include <stdio.h>
#include <string.h>

/* Joins a NULL-terminated array of strings into one allocated string.
 * OPENSSL_malloc is deliberately not declared here; the definition lives
 * in alloc.c. */
char *glue_strings(const char *list[])
{
    size_t len = 0;
    char *p, *ret;
    int i;

    for (i = 0; list[i] != NULL; i++)
        len += strlen(list[i]);

    if (!(ret = p = OPENSSL_malloc(len + 1)))
        return NULL;

    for (i = 0; list[i] != NULL; i++)
        p += strlen(strcpy(p, list[i])); /* WARN */

    return ret;
}

static void print_banner(const char *tag)
{
    printf("[driver] %s\n", tag);
}

int main(void)
{
    print_banner("corpus glue demo");
    return 0;
}
