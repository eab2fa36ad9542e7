/* Builds a small network, segments one phantom and scores it. */
#include <stdio.h>
#include <stdlib.h>

#include "utnet.h"

#define SIZE 32

static int check(enum UtnetStatus s, const char *what) {
    if (s != UTNET_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, utnet_last_error());
        return 1;
    }
    return 0;
}

int main(void) {
    const char *cfg = "{\"base_channels\": 4, \"levels\": 3, \"attention_levels\": \"12\","
                      " \"attention\": {\"heads\": 2, \"reduced_size\": 4}}";
    static double image[SIZE * SIZE];
    static uint8_t truth[SIZE * SIZE], pred[SIZE * SIZE];
    UtnetModel *model = NULL;
    uint64_t params = 0;
    double dice = 0.0, hd = 0.0;

    if (check(utnet_model_from_json(cfg, 1, &model), "model")) return 1;
    if (check(utnet_model_num_params(model, &params), "num_params")) return 1;
    if (check(utnet_synth_generate(5, 2, SIZE, image, truth), "synth")) return 1;
    if (check(utnet_model_segment(model, image, SIZE, pred), "segment")) return 1;
    if (check(utnet_dice(truth, truth, SIZE * SIZE, 1, &dice), "dice")) return 1;
    if (check(utnet_hausdorff(pred, truth, SIZE, SIZE, 2, &hd), "hausdorff")) return 1;
    if (utnet_model_load("/nonexistent", &model) == UTNET_STATUS_OK) return 1;
    utnet_model_free(model);

    printf("utnet %s params=%llu self_dice=%.1f flops_ratio=%.0f\n", utnet_version(),
           (unsigned long long)params, dice,
           utnet_attention_flops(UTNET_ATTENTION_STANDARD, 1024, 64, 8, 4) /
               utnet_attention_flops(UTNET_ATTENTION_EFFICIENT, 1024, 64, 8, 4));
    return 0;
}
