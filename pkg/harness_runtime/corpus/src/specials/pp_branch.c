#ifdef SF_OTHER_OS
int sf_branch_marker(void)
{
    return 111; /* other-os branch */
}
#else
int sf_branch_marker(void)
{
    return 222; /* default branch */
}
#endif
