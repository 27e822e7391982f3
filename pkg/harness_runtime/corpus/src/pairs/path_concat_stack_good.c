#include <string.h>

int sf_path_concat_stack_good(const char *name)
{
    char path[40];
    strcpy(path, "/var/run/app/");
    if (strlen(name) < sizeof(path) - 14)
        strcat(path, name); /* WARN */
    return path[0];
}
