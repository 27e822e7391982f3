struct sf_pair {
    int a;
    char b;
};

int sf_struct_arg_good(const struct sf_pair *p)
{
    int mix = p->a + p->b; /* WARN */
    return mix;
}
