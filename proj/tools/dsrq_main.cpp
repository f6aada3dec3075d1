// dsrq: discretize continuous feature sequences into token streams.
//
// Subcommands: gen-synth, train, encode, dedup, bpe-train, bpe-apply,
// stats, verify-theory. All randomness flows from --seed; identical inputs
// and flags produce byte-identical outputs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsr/feature_io.hpp"
#include "dsr/quantizer.hpp"
#include "dsr/synthetic.hpp"
#include "dsr/theory.hpp"
#include "dsr/tokens.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitUsage = 64;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6e", v);
    return buf;
}

struct CheckPrinter {
    bool all_pass = true;
    void report(const std::string& name, double empirical, double predicted, double tol,
                bool pass) {
        const double rel_gap =
            predicted != 0.0 ? std::abs(empirical - predicted) / std::abs(predicted)
                             : std::abs(empirical);
        std::cout << (pass ? "PASS" : "FAIL") << ' ' << name << " empirical=" << fmt(empirical)
                  << " predicted=" << fmt(predicted) << " rel_gap=" << fmt(rel_gap)
                  << " tol=" << fmt(tol) << '\n';
        all_pass = all_pass && pass;
    }
};

int run_verify_theory(std::uint64_t n_trials, std::uint64_t seed, int threads,
                      const std::string& csv_path) {
    CheckPrinter out;
    std::ofstream csv;
    if (!csv_path.empty()) {
        csv.open(csv_path, std::ios::trunc);
        if (!csv) {
            throw dsr::IoError("cannot open csv: " + csv_path);
        }
        csv << "M,rho,empirical,predicted,bias2,variance,rel_gap\n";
    }

    const std::vector<std::uint32_t> Ms = {1, 2, 4, 8, 16, 32};
    const std::vector<double> rhos = {0.0, 0.1, 0.25, 0.5, 1.0};
    for (std::uint32_t M : Ms) {
        for (double rho : rhos) {
            dsr::TheoryParams p;
            p.n_subspaces = M;
            p.rho = rho;
            p.sigma2 = 1.0;
            p.n_trials = n_trials;
            p.seed = seed;
            p.threads = threads;
            const auto r = dsr::centroid_model_mc(p);
            const std::string name =
                "eq14-M" + std::to_string(M) + "-rho" + fmt(rho).substr(0, 8);
            out.report(name, r.empirical_error, r.predicted_error, 0.02, r.rel_gap < 0.02);
            const bool in_bounds = r.empirical_error >= 0.98 * rho * p.sigma2 &&
                                   r.empirical_error <= 1.02 * p.sigma2;
            out.report("bound-M" + std::to_string(M) + "-rho" + fmt(rho).substr(0, 8),
                       r.empirical_error, r.predicted_error, 0.02, in_bounds);
            if (csv.is_open()) {
                csv << M << ',' << fmt(rho) << ',' << fmt(r.empirical_error) << ','
                    << fmt(r.predicted_error) << ',' << fmt(r.bias2) << ',' << fmt(r.variance)
                    << ',' << fmt(r.rel_gap) << '\n';
            }
        }
    }

    {
        const auto r = dsr::overlap_expectation_mc(16, 4, 100000, seed);
        out.report("eq15-overlap-D16-d4", r.mean_overlap, 1.0, 0.05,
                   std::abs(r.mean_overlap - 1.0) < 0.05);
    }
    for (double alpha : {0.0625, 0.125, 0.25, 0.5}) {
        const std::uint32_t d = static_cast<std::uint32_t>(alpha * 1024);
        const auto r = dsr::overlap_expectation_mc(1024, d, 10000, seed);
        const double predicted = dsr::predicted_rho(alpha);
        out.report("eq17-jaccard-alpha" + fmt(alpha).substr(0, 8), r.mean_jaccard, predicted,
                   0.05, std::abs(r.mean_jaccard - predicted) / predicted < 0.05);
    }
    return out.all_pass ? kExitOk : kExitValidation;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"vector discretization: K-means / PQ / RPQ"};
    app.require_subcommand(1);

    // gen-synth
    auto* gen = app.add_subcommand("gen-synth", "generate a seeded synthetic corpus");
    dsr::SynthSpec spec;
    std::string gen_out;
    gen->add_option("--dim", spec.dim, "feature dimension")->required();
    gen->add_option("--frames", spec.n_frames, "number of frames")->required();
    gen->add_option("--modes", spec.n_modes, "Gaussian mixture components")->default_val(8);
    gen->add_option("--correlation", spec.correlation, "target pair correlation in [0,1]");
    gen->add_option("--mode-spread", spec.mode_spread, "std-dev of component means");
    gen->add_option("--seed", spec.seed, "RNG seed");
    gen->add_option("--out", gen_out, "output DSRF file")->required();

    // train
    auto* train = app.add_subcommand("train", "train a quantizer model");
    std::string train_features, train_model, method = "kmeans", init;
    std::uint32_t M = 1, k_star = 2000, max_iters = 100;
    double alpha = 0.0, rel_tol = 1e-4;
    std::uint64_t seed = 0;
    int threads = 1;
    train->add_option("--features", train_features, "input DSRF file")->required();
    train->add_option("--model", train_model, "output DSRQ file")->required();
    train->add_option("--method", method, "kmeans | pq | rpq")
        ->check(CLI::IsMember({"kmeans", "pq", "rpq"}));
    train->add_option("--num-subspaces", M, "M");
    train->add_option("--clusters", k_star, "centroids per sub-quantizer");
    train->add_option("--alpha", alpha, "dimension sampling ratio (rpq)");
    train->add_option("--seed", seed, "RNG seed");
    train->add_option("--init", init, "random | kmeanspp")
        ->check(CLI::IsMember({"random", "kmeanspp"}));
    train->add_option("--max-iters", max_iters, "Lloyd iteration cap");
    train->add_option("--tol", rel_tol, "relative inertia-improvement stop");
    train->add_option("--threads", threads, "worker threads (result-identical)");

    // encode
    auto* enc = app.add_subcommand("encode", "encode features to token streams");
    std::string enc_model, enc_features, enc_out;
    enc->add_option("--model", enc_model)->required();
    enc->add_option("--features", enc_features)->required();
    enc->add_option("--out", enc_out)->required();

    // dedup
    auto* dd = app.add_subcommand("dedup", "collapse consecutive identical tokens");
    std::string dd_in, dd_out;
    dd->add_option("--in", dd_in)->required();
    dd->add_option("--out", dd_out)->required();

    // bpe-train
    auto* bt = app.add_subcommand("bpe-train", "train pair-merge rules");
    std::string bt_in, bt_out;
    std::uint32_t target_vocab = 3000, base_vocab = 0;
    bt->add_option("--in", bt_in)->required();
    bt->add_option("--target-vocab", target_vocab, "vocabulary size after merging");
    bt->add_option("--base-vocab", base_vocab, "base vocabulary (0 = infer)");
    bt->add_option("--out", bt_out, "output merge table")->required();

    // bpe-apply
    auto* ba = app.add_subcommand("bpe-apply", "apply trained merge rules");
    std::string ba_in, ba_merges, ba_out;
    ba->add_option("--in", ba_in)->required();
    ba->add_option("--merges", ba_merges)->required();
    ba->add_option("--out", ba_out)->required();

    // stats
    auto* st = app.add_subcommand("stats", "average length and vocabulary usage");
    std::string st_in;
    st->add_option("--in", st_in)->required();

    // verify-theory
    auto* vt = app.add_subcommand("verify-theory", "run the quantization-error checks");
    std::uint64_t vt_trials = 1000000, vt_seed = 1;
    int vt_threads = 1;
    std::string vt_csv;
    vt->add_option("--n-trials", vt_trials, "Monte-Carlo trials per grid point");
    vt->add_option("--seed", vt_seed, "RNG seed");
    vt->add_option("--threads", vt_threads, "worker threads (result-identical)");
    vt->add_option("--csv", vt_csv, "optional CSV dump of the (M, rho) grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    if (gen->parsed()) {
        dsr::write_features(dsr::generate_synthetic(spec), gen_out);
        return kExitOk;
    }
    if (train->parsed()) {
        if (method == "rpq" && !(alpha > 0.0)) {
            std::cerr << "--alpha is required for --method rpq\n";
            return kExitUsage;
        }
        const auto data = dsr::read_features(train_features);
        dsr::KmeansConfig cfg;
        cfg.init = init.empty() ? (method == "rpq" ? dsr::KmeansInit::random
                                                   : dsr::KmeansInit::kmeanspp)
                                : (init == "random" ? dsr::KmeansInit::random
                                                    : dsr::KmeansInit::kmeanspp);
        cfg.max_iters = max_iters;
        cfg.rel_tol = rel_tol;
        cfg.seed = seed;
        cfg.threads = threads;
        dsr::SubspaceLayout layout;
        dsr::QuantizerMethod qm;
        if (method == "kmeans") {
            layout = dsr::make_layout_contiguous(data.dim, 1);
            qm = dsr::QuantizerMethod::kmeans;
        } else if (method == "pq") {
            layout = dsr::make_layout_contiguous(data.dim, M);
            qm = dsr::QuantizerMethod::pq;
        } else {
            layout = dsr::make_layout_random(data.dim, M, alpha, seed);
            qm = dsr::QuantizerMethod::rpq;
        }
        const auto model = dsr::train_quantizer(data, layout, k_star, cfg, qm);
        dsr::save_model(model, train_model);
        return kExitOk;
    }
    if (enc->parsed()) {
        const auto model = dsr::load_model(enc_model);
        const auto data = dsr::read_features(enc_features);
        dsr::write_token_file({dsr::encode_batch(data, model)}, enc_out);
        return kExitOk;
    }
    if (dd->parsed()) {
        auto corpus = dsr::read_token_file(dd_in);
        for (auto& s : corpus) {
            s = dsr::dedup(s);
        }
        dsr::write_token_file(corpus, dd_out);
        return kExitOk;
    }
    if (bt->parsed()) {
        const auto corpus = dsr::read_token_file(bt_in);
        dsr::save_merge_table(dsr::train_merges(corpus, target_vocab, base_vocab), bt_out);
        return kExitOk;
    }
    if (ba->parsed()) {
        auto corpus = dsr::read_token_file(ba_in);
        const auto table = dsr::load_merge_table(ba_merges);
        for (auto& s : corpus) {
            s = dsr::apply_merges(s, table);
        }
        dsr::write_token_file(corpus, ba_out);
        return kExitOk;
    }
    if (st->parsed()) {
        const auto stats = dsr::stream_stats(dsr::read_token_file(st_in));
        std::cout << "avg_length=" << fmt(stats.avg_length) << " vocab_used=" << stats.vocab_used
                  << '\n';
        return kExitOk;
    }
    return run_verify_theory(vt_trials, vt_seed, vt_threads, vt_csv);
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const dsr::FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const dsr::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const dsr::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}
