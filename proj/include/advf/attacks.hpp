#pragma once

#include <functional>
#include <string>
#include <vector>

#include "advf/catalog.hpp"
#include "advf/image_io.hpp"
#include "advf/model.hpp"

namespace advf {

// Attack parameterization in 8-bit pixel units. epsilon < 0 means the
// non-binding default ss * ns, so the step count stays observable in the
// pixels.
struct AttackConfig {
    AttackFamily family = AttackFamily::FGSM;
    int step_size = 1;   // ss: per-iteration sign-step magnitude
    int num_steps = 1;   // ns: FGSM fixes this to 1
    double epsilon = -1; // L-inf budget around the clean image
    int target_label = 0;
    uint64_t seed = 0;

    double effective_epsilon() const {
        return epsilon < 0 ? static_cast<double>(step_size) * num_steps : epsilon;
    }
    // min(eps, ss*ns) floored to whole pixel levels
    int linf_bound() const;
    void validate() const;
};

struct AttackResult {
    Image adversarial;
    int achieved_linf = 0;
    bool target_success = false;
    int iterations = 0;
};

// Uniform over [0, category_count) excluding true_label; deterministic in seed.
int random_target(int true_label, int category_count, uint64_t seed);

// d(loss toward target)/d(pixel) at a real-valued pixel tensor, plus the
// resulting probability vector for success checks.
using GradFn = std::function<Tensor(const Tensor& pixels)>;
using PredictFn = std::function<std::vector<float>(const Image&)>;

// x' = quantize(clamp(x - ss * sign(grad J(x, target)), 0, 255)); the gradient
// is taken once, at the clean image.
AttackResult fgsm_targeted(const Checkpoint& target_net, const Image& image, const AttackConfig& config);

// ns iterations of the signed step with the accumulated perturbation
// projected onto the eps-ball each iteration; real-valued iterates,
// quantization once at the end.
AttackResult pgd_targeted(const Checkpoint& target_net, const Image& image, const AttackConfig& config);

AttackResult run_attack(const Checkpoint& target_net, const Image& image, const AttackConfig& config);

// Cores with injectable gradient/predict callables (unit tests drive these
// with synthetic gradient fixtures).
AttackResult fgsm_targeted_core(const GradFn& grad, const PredictFn& predict_fn, const Image& image,
                                const AttackConfig& config);
AttackResult pgd_targeted_core(const GradFn& grad, const PredictFn& predict_fn, const Image& image,
                               const AttackConfig& config);

// One line of an attack batch request file:
// input<TAB>output<TAB>family<TAB>ss<TAB>ns<TAB>eps<TAB>target<TAB>seed
// eps may be "-" for the non-binding default.
struct AttackRequest {
    std::string input_path;
    std::string output_path;
    AttackConfig config;
};

std::vector<AttackRequest> parse_attack_requests(const std::string& text);
// Executes every request against one target checkpoint; returns per-request
// results in file order.
std::vector<AttackResult> run_attack_batch(const Checkpoint& target_net, const std::vector<AttackRequest>& requests,
                                           int threads = 0);

}  // namespace advf
