// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance [--only 1,3] [--exclude 5]
// Exit 0 when every selected criterion passes, 1 when any fails, 77 when all were skipped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "audits.hpp"
#include "cli.hpp"
#include "e2efs/baselines.hpp"
#include "e2efs/eval.hpp"
#include "e2efs/mask.hpp"
#include "e2efs/optim.hpp"
#include "e2efs/trainer.hpp"

using namespace e2efs;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
    Verdict verdict;
    std::string detail;
};

Outcome from_audits(std::initializer_list<std::pair<const char*, audit::Result>> parts) {
    bool ok = true;
    std::ostringstream s;
    for (const auto& [name, r] : parts) {
        ok = ok && r.ok;
        s << name << ": " << r.instances << " instances, worst " << r.worst;
        if (r.redrawn) s << " (" << r.redrawn << " redrawn at kinks)";
        if (!r.ok) s << " (" << r.detail << ")";
        s << "; ";
    }
    return {ok ? Verdict::Pass : Verdict::Fail, s.str()};
}

// ---- 1, 2, 6: audits --------------------------------------------------------------

Outcome gradient_audit() {
    return from_audits({{"mask regularizer", audit::reg_gradient_fd(200, 101)},
                        {"square hinge", audit::square_hinge_fd(150, 102)},
                        {"naive linear", audit::naive_fd(150, 103)},
                        {"dense net", audit::dense_fd(120, 104)}});
}

Outcome penalty_property_suite() {
    return from_audits({{"sign properties", audit::sign_properties(1000, 201)},
                        {"zero sets", audit::zero_sets(1000, 202)},
                        {"mass separation", audit::separation(1000, 203)}});
}

Outcome baseline_oracles() {
    return from_audits({{"MIM", audit::mim_oracle(200, 601)},
                        {"Fisher", audit::fisher_oracle(200, 602)},
                        {"ReliefF", audit::relieff_oracle(100, 603)}});
}

// ---- 3, 4: synthetic convergence and recovery ---------------------------------------

struct SynthRun {
    bool converged = false;
    std::size_t nnz = 0;
    double loss = 0.0;
    std::size_t selected = 0;
    std::size_t recovered = 0;
};

SynthRun synth_run(std::uint64_t seed, MaskVariant variant) {
    const auto syn = make_synthetic({2000, 10, 90, 0.0, seed});
    Dataset d = syn.data;
    d.X = erf_normalize(d.X, compute_norm_stats(d.X));
    auto cfg = TrainConfig::recipe(variant);
    cfg.seed = seed;
    ModelConfig mc;
    mc.seed = seed;
    auto model = make_model(mc, d.features(), d.class_count, d.samples());
    auto mask = MaskState::all_ones(d.features(), 10, variant);
    const auto r = train(d, *model, mask, cfg);
    SynthRun out{r.converged, r.final_nnz, r.final_l12 + r.final_lM, r.selected_indices.size(), 0};
    for (auto i : r.selected_indices)
        out.recovered += std::binary_search(syn.informative.begin(), syn.informative.end(), i);
    return out;
}

struct SynthRuns {
    std::vector<SynthRun> hard, soft;
};

const SynthRuns& synth_runs() {
    static const SynthRuns runs = [] {
        SynthRuns r;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            r.hard.push_back(synth_run(seed, MaskVariant::Hard));
            r.soft.push_back(synth_run(seed, MaskVariant::Soft));
        }
        return r;
    }();
    return runs;
}

Outcome convergence() {
    std::size_t good = 0;
    std::ostringstream s;
    for (const auto& r : synth_runs().hard) {
        const bool ok = r.converged && r.nnz == 10 && r.loss <= 1e-3;
        good += ok;
        s << (ok ? "" : "[") << "nnz " << r.nnz << " L " << r.loss << (ok ? "" : "]") << "; ";
    }
    s << good << "/5 seeds converged with nnz = 10";
    return {good >= 4 ? Verdict::Pass : Verdict::Fail, s.str()};
}

Outcome recovery() {
    const auto& runs = synth_runs();
    double mean = 0.0;
    for (const auto& r : runs.hard) mean += static_cast<double>(r.recovered) / 5.0;
    bool soft_ok = true;
    std::ostringstream s;
    s << "hard: mean recovered " << mean << "/10; soft:";
    for (const auto& r : runs.soft) {
        const double frac = r.selected ? static_cast<double>(r.recovered) / static_cast<double>(r.selected) : 0.0;
        const bool ok = r.nnz <= 10 && r.selected > 0 && frac >= 0.8;
        soft_ok = soft_ok && ok;
        s << " nnz " << r.nnz << " frac " << frac << (ok ? "" : " [fail]") << ";";
    }
    return {mean >= 8.0 && soft_ok ? Verdict::Pass : Verdict::Fail, s.str()};
}

// ---- 5: microarray benchmark ----------------------------------------------------------

Outcome colon() {
    const char* path = std::getenv("E2EFS_COLON_DATA");
    if (!path || !*path || !fs::exists(path))
        return {Verdict::Skip, "set E2EFS_COLON_DATA to the COLON dataset (CSV, label last; or .svm/.libsvm)"};
    Dataset d;
    try {
        const auto ext = fs::path(path).extension().string();
        d = (ext == ".svm" || ext == ".libsvm") ? load_libsvm(path) : load_csv(path);
        d.validate();
    } catch (const std::exception& e) {
        return {Verdict::Fail, std::string("cannot load: ") + e.what()};
    }
    BenchmarkConfig c;
    c.methods = {"e2efs", "fisher"};
    c.grid = {10, 50, 100, 150, 200};
    c.folds = 3;
    c.repeats = 3;
    c.seed = 0;
    c.jobs = std::max(1u, std::thread::hardware_concurrency());
    const auto rep = run_benchmark({{"colon", d}}, c);
    const auto* e = rep.find("colon", "e2efs");
    const auto* f = rep.find("colon", "fisher");
    std::ostringstream s;
    s << "N=" << d.samples() << " F=" << d.features() << "; e2efs AuC-BA " << e->auc_mean << " +- " << e->auc_std
      << " (" << e->non_converged << " non-converged); fisher " << f->auc_mean << " +- " << f->auc_std;
    const bool ok = e->auc_runs > 0 && e->auc_mean >= 0.78 && e->auc_mean <= 0.92 && f->auc_mean >= 0.76 &&
                    f->auc_mean <= 0.90 && e->auc_mean >= f->auc_mean - 0.02;
    return {ok ? Verdict::Pass : Verdict::Fail, s.str()};
}

// ---- 7: schedules ---------------------------------------------------------------------

Outcome schedules() {
    struct Case {
        const char* what;
        double got, want;
    };
    LrSchedule lr;
    lr.freeze_until = 300;
    const Case cases[] = {
        {"effective_M soft nnz=100 M=50 rho=0.75", effective_M(100, 50, 0.75, MaskVariant::Soft), 12.5},
        {"effective_M soft nnz=30 M=50", effective_M(30, 50, 0.75, MaskVariant::Soft), 30.0},
        {"effective_M hard nnz=100 M=50", effective_M(100, 50, 0.75, MaskVariant::Hard), 50.0},
        {"alpha (0, 300)", alpha_schedule(0, 300), 0.0},
        {"alpha (150, 300)", alpha_schedule(150, 300), 0.5},
        {"alpha (400, 300)", alpha_schedule(400, 300), 1.0},
        {"lr epoch 299", lr_at(lr, 299), 1e-3},
        {"lr epoch 349", lr_at(lr, 349), 1e-3},
        {"lr epoch 350", lr_at(lr, 350), 2e-4},
        {"lr epoch 400", lr_at(lr, 400), 4e-5},
    };
    std::ostringstream s;
    bool ok = true;
    for (const auto& c : cases)
        if (c.got != c.want) {
            ok = false;
            s << c.what << ": got " << c.got << " want " << c.want << "; ";
        }
    s << std::size(cases) << " exact values checked";
    return {ok ? Verdict::Pass : Verdict::Fail, s.str()};
}

// ---- 8: CLI determinism -----------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome cli_determinism() {
    const auto root = fs::temp_directory_path() / "e2efs_acceptance_cli";
    fs::remove_all(root);
    const auto data = (root / "synth" / "synth.csv").string();
    using Args = std::vector<std::string>;
    const std::vector<std::pair<std::string, Args>> runs = {
        {"synth", {"synth", "--n", "400", "--informative", "4", "--noise", "16", "--seed", "8"}},
        {"select-e2efs", {"select", "--method", "e2efs", "--m", "4", "--data", data, "--seed", "8"}},
        {"select-soft", {"select", "--method", "e2efs-soft", "--m", "4", "--data", data, "--seed", "8"}},
        {"select-dense", {"select", "--method", "e2efs", "--model", "dense", "--m", "4", "--data", data, "--fs-epochs",
                          "100", "--T", "100", "--fit-epochs", "30", "--seed", "8"}},
        {"select-relieff", {"select", "--method", "relieff", "--m", "4", "--data", data}},
        {"select-mim", {"select", "--method", "mim", "--m", "4", "--data", data}},
        {"select-fisher", {"select", "--method", "fisher", "--m", "4", "--data", data}},
        {"select-random", {"select", "--method", "random", "--m", "4", "--data", data, "--seed", "8"}},
        {"bench", {"bench", "--data", data, "--methods", "e2efs,e2efs-soft,fisher,mim,relieff", "--grid", "2,4,8",
                   "--folds", "3", "--repeats", "2", "--fs-epochs", "80", "--T", "80", "--fs-epochs-soft", "60",
                   "--T-soft", "50", "--fit-epochs", "30", "--seed", "8"}},
        {"eval", {"eval", "--data", data, "--indices", "0,1,2,3", "--fit-epochs", "30", "--seed", "8"}},
    };
    std::ostringstream s;
    std::size_t files = 0;
    bool ok = true;
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& [name, args] : runs) {
            Args a = args;
            a.insert(a.end(), {"--out", (root / (pass ? name + "-again" : name)).string()});
            if (name != "synth") a.insert(a.end(), {"--jobs", pass ? "3" : "1"});
            std::ostringstream out, err;
            const int code = cli::run(a, out, err);
            if (code != cli::kOk) {
                ok = false;
                s << name << " exited " << code << ": " << err.str() << "; ";
            }
        }
    for (const auto& [name, args] : runs)
        for (const auto& entry : fs::directory_iterator(root / name)) {
            const auto twin = root / (name + "-again") / entry.path().filename();
            ++files;
            if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin)) {
                ok = false;
                s << name << "/" << entry.path().filename().string() << " differs; ";
            }
        }
    s << files << " artifacts from " << runs.size() << " commands compared byte for byte";
    return {ok && files > 0 ? Verdict::Pass : Verdict::Fail, s.str()};
}

std::set<int> parse_list(const std::string& text) {
    std::set<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.insert(std::stoi(item));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string only, exclude;
    app.add_option("--only", only, "comma-separated criteria to run");
    app.add_option("--exclude", exclude, "comma-separated criteria to skip");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"gradient audit against central differences", gradient_audit},
        {"sign and zero-set properties of the mask penalty", penalty_property_suite},
        {"convergence on synthetic data (M=10, 5 seeds)", convergence},
        {"recovery of informative features (hard and soft)", recovery},
        {"COLON AuC-BA, 3 x 3-fold", colon},
        {"filter rankers match brute-force definitions", baseline_oracles},
        {"schedule values", schedules},
        {"CLI outputs byte-identical on rerun", cli_determinism},
    };
    const auto keep = parse_list(only), drop = parse_list(exclude);

    std::size_t ran = 0, failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if ((!keep.empty() && !keep.count(id)) || drop.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {Verdict::Fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
        std::cout << tag << "  " << id << "  " << criteria[i].first << "  (" << std::fixed << std::setprecision(1)
                  << secs << " s)  " << std::defaultfloat << std::setprecision(6) << o.detail << std::endl;
        if (o.verdict != Verdict::Skip) ++ran;
        if (o.verdict == Verdict::Fail) ++failed;
    }
    if (failed) return 1;
    return ran == 0 ? 77 : 0;
}
