#include <string.h>

int sf_path_concat_stack_bad(const char *name)
{
    char path[40];
    strcpy(path, "/var/run/app/");
    strcat(path, name); /* WARN */
    return path[0];
}
