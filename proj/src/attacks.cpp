#include "advf/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "advf/parallel.hpp"
#include "advf/rng.hpp"

namespace advf {

int AttackConfig::linf_bound() const {
    double b = std::min(effective_epsilon(), static_cast<double>(step_size) * num_steps);
    return static_cast<int>(std::floor(std::max(0.0, b)));
}

void AttackConfig::validate() const {
    if (step_size < 0) throw std::invalid_argument("attack config: step size must be >= 0");
    if (num_steps < 1) throw std::invalid_argument("attack config: step count must be >= 1");
    if (family == AttackFamily::FGSM && num_steps != 1) {
        throw std::invalid_argument("attack config: FGSM implies a single step");
    }
    if (target_label < 0) throw std::invalid_argument("attack config: negative target label");
}

int random_target(int true_label, int category_count, uint64_t seed) {
    if (category_count < 2) throw std::invalid_argument("random_target: need at least 2 categories");
    if (true_label < 0 || true_label >= category_count) {
        throw std::invalid_argument("random_target: true label out of range");
    }
    Rng rng(seed);
    int draw = rng.uniform_int(0, category_count - 2);
    return draw + (draw >= true_label ? 1 : 0);
}

namespace {

inline float sgn(float x) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); }

// Final 8-bit projection: round, clamp to the valid range, then clamp the
// integer perturbation to the floored budget (a no-op for whole-pixel eps).
AttackResult finish(const Image& clean, const Tensor& adv_real, const AttackConfig& config,
                    const PredictFn& predict_fn, int iterations) {
    AttackResult res;
    res.adversarial = Image(clean.height, clean.width);
    const int bound = config.linf_bound();
    for (size_t i = 0; i < clean.pix.size(); ++i) {
        long q = std::lround(static_cast<double>(adv_real.v[i]));
        q = std::clamp(q, 0l, 255l);
        int dq = std::clamp(static_cast<int>(q) - static_cast<int>(clean.pix[i]), -bound, bound);
        res.adversarial.pix[i] = static_cast<uint8_t>(static_cast<int>(clean.pix[i]) + dq);
        res.achieved_linf = std::max(res.achieved_linf, std::abs(dq));
    }
    res.iterations = iterations;
    if (predict_fn) {
        res.target_success = argmax(predict_fn(res.adversarial)) == config.target_label;
    }
    return res;
}

Tensor checked_grad(const GradFn& grad, const Tensor& pixels) {
    Tensor g = grad(pixels);
    if (g.shape != pixels.shape) throw std::invalid_argument("attack: gradient shape mismatch");
    check_finite(g, "attack gradient");
    return g;
}

}  // namespace

AttackResult fgsm_targeted_core(const GradFn& grad, const PredictFn& predict_fn, const Image& image,
                                const AttackConfig& config) {
    config.validate();
    if (config.family != AttackFamily::FGSM) throw std::invalid_argument("fgsm_targeted: config family is not FGSM");
    Tensor x0 = image_to_tensor(image);
    const double eps = config.effective_epsilon();
    if (config.step_size == 0 || eps <= 0.0) {
        AttackResult res;
        res.adversarial = image;
        if (predict_fn) res.target_success = argmax(predict_fn(res.adversarial)) == config.target_label;
        return res;
    }
    // descent step: the loss toward the target label is minimized
    Tensor g = checked_grad(grad, x0);
    Tensor adv(x0.shape);
    const float ss = static_cast<float>(config.step_size);
    const float feps = static_cast<float>(eps);
    for (size_t i = 0; i < x0.v.size(); ++i) {
        float delta = -ss * sgn(g.v[i]);
        delta = std::clamp(delta, -feps, feps);
        adv.v[i] = std::clamp(x0.v[i] + delta, 0.0f, 255.0f);
    }
    return finish(image, adv, config, predict_fn, 1);
}

AttackResult pgd_targeted_core(const GradFn& grad, const PredictFn& predict_fn, const Image& image,
                               const AttackConfig& config) {
    config.validate();
    Tensor x0 = image_to_tensor(image);
    const double eps = config.effective_epsilon();
    if (config.step_size == 0 || eps <= 0.0) {
        AttackResult res;
        res.adversarial = image;
        if (predict_fn) res.target_success = argmax(predict_fn(res.adversarial)) == config.target_label;
        return res;
    }
    const float ss = static_cast<float>(config.step_size);
    const float feps = static_cast<float>(eps);
    Tensor iterate = x0;  // x0 + accumulated perturbation
    for (int it = 0; it < config.num_steps; ++it) {
        Tensor g = checked_grad(grad, iterate);
        for (size_t i = 0; i < x0.v.size(); ++i) {
            float delta = iterate.v[i] - ss * sgn(g.v[i]) - x0.v[i];
            delta = std::clamp(delta, -feps, feps);  // project onto the eps-ball
            iterate.v[i] = std::clamp(x0.v[i] + delta, 0.0f, 255.0f);
        }
    }
    return finish(image, iterate, config, predict_fn, config.num_steps);
}

namespace {

struct NetCallbacks {
    std::shared_ptr<NetGraph> net;
    const Checkpoint* ckpt;

    explicit NetCallbacks(const Checkpoint& c) : ckpt(&c) {
        net = std::make_shared<NetGraph>(c.spec, &c.weights);
        net->g.set_param_needs_grad(false);  // attacks only need the input gradient
    }

    GradFn grad_fn(int target) const {
        auto n = net;
        return [n, target](const Tensor& pixels) {
            Tensor scaled(pixels.shape);
            for (size_t i = 0; i < pixels.v.size(); ++i) scaled.v[i] = pixels.v[i] / 255.0f;
            n->g.set_input(n->input, scaled);
            n->g.set_ce_target(n->loss, target);
            n->g.forward(n->loss);
            n->g.backward(n->loss);
            // gradient w.r.t. the scaled input; the sign matches the
            // pixel-domain gradient, which is all the attacks consume
            return n->g.grad(n->input);
        };
    }

    PredictFn predict_fn() const {
        auto n = net;
        return [n](const Image& img) {
            n->g.set_input(n->input, target_input(img));
            const Tensor& z = n->g.forward(n->logits);
            return softmax(z.v);
        };
    }
};

}  // namespace

AttackResult fgsm_targeted(const Checkpoint& target_net, const Image& image, const AttackConfig& config) {
    NetCallbacks cb(target_net);
    return fgsm_targeted_core(cb.grad_fn(config.target_label), cb.predict_fn(), image, config);
}

AttackResult pgd_targeted(const Checkpoint& target_net, const Image& image, const AttackConfig& config) {
    NetCallbacks cb(target_net);
    return pgd_targeted_core(cb.grad_fn(config.target_label), cb.predict_fn(), image, config);
}

AttackResult run_attack(const Checkpoint& target_net, const Image& image, const AttackConfig& config) {
    return config.family == AttackFamily::FGSM ? fgsm_targeted(target_net, image, config)
                                               : pgd_targeted(target_net, image, config);
}

std::vector<AttackRequest> parse_attack_requests(const std::string& text) {
    std::vector<AttackRequest> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        AttackRequest req;
        std::string fam, eps;
        if (!(ls >> req.input_path >> req.output_path >> fam >> req.config.step_size >> req.config.num_steps >>
              eps >> req.config.target_label >> req.config.seed)) {
            throw std::runtime_error("attack batch: malformed record at line " + std::to_string(line_no));
        }
        req.config.family = family_from_name(fam);
        req.config.epsilon = eps == "-" ? -1.0 : std::stod(eps);
        req.config.validate();
        out.push_back(std::move(req));
    }
    return out;
}

std::vector<AttackResult> run_attack_batch(const Checkpoint& target_net, const std::vector<AttackRequest>& requests,
                                           int threads) {
    std::vector<AttackResult> results(requests.size());
    parallel_for(static_cast<int>(requests.size()), threads, [&](int i) {
        const AttackRequest& req = requests[static_cast<size_t>(i)];
        Image img = load_image(req.input_path);
        results[static_cast<size_t>(i)] = run_attack(target_net, img, req.config);
        save_image(results[static_cast<size_t>(i)].adversarial, req.output_path);
    });
    return results;
}

}  // namespace advf
