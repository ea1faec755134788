#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include "uihpq.h"

#define CHECK(x) do { int32_t rc_ = (x); if (rc_ != UIHPQ_OK) { fprintf(stderr, "%s -> %d\n", #x, rc_); return 1; } } while (0)

int main(void) {
    UihpqMap *m = NULL;
    CHECK(uihpq_sample_boltzmann(4, 0.3, 7, &m));
    size_t he, v, f, per, need;
    CHECK(uihpq_map_counts(m, &he, &v, &f));
    CHECK(uihpq_map_perimeter(m, &per));
    if (per != 8 || v + f != he / 2 + 2) return 2;
    CHECK(uihpq_map_to_pmap(m, NULL, 0, &need));
    char *text = malloc(need);
    CHECK(uihpq_map_to_pmap(m, text, need, &need));
    UihpqMap *back = NULL;
    CHECK(uihpq_map_from_pmap(text, &back));
    size_t n1, n2;
    CHECK(uihpq_map_canonical_encoding(m, NULL, 0, &n1));
    CHECK(uihpq_map_canonical_encoding(back, NULL, 0, &n2));
    uint8_t *e1 = malloc(n1), *e2 = malloc(n2);
    CHECK(uihpq_map_canonical_encoding(m, e1, n1, &n1));
    CHECK(uihpq_map_canonical_encoding(back, e2, n2, &n2));
    if (n1 != n2 || memcmp(e1, e2, n1) != 0) return 3;
    if (uihpq_map_from_pmap("not a map", &back) != UIHPQ_ERR_PARSE && uihpq_map_from_pmap("not a map", &back) != UIHPQ_ERR_INVALID_MAP) return 4;
    UihpqReport *r = NULL;
    CHECK(uihpq_run("prefix-law", "{\"seed\": 2}", &r));
    int32_t pass = 0;
    CHECK(uihpq_report_pass(r, &pass));
    if (!pass) return 5;
    printf("ok %s\n", uihpq_version());
    uihpq_report_free(r);
    uihpq_map_free(back);
    uihpq_map_free(m);
    free(text); free(e1); free(e2);
    return 0;
}
