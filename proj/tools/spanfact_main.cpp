// spanfact: entity-level fact correction for summaries.
//
// Subcommands: gen, build-data, corrupt, train, correct, evaluate.
// Exit codes: 0 success, 2 input error, 3 numeric failure, 4 config error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spanfact/corpus.hpp"
#include "spanfact/corrector.hpp"
#include "spanfact/encoder.hpp"
#include "spanfact/metrics.hpp"
#include "spanfact/synth.hpp"
#include "spanfact/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spanfact;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key-value configuration; file values first, flags override.
struct RunConfig {
    std::size_t max_len = 128;
    std::size_t k = 10;
    std::size_t b = 5;
    std::uint64_t seed = 1;
    int min_count = 1;
    std::string lexicon;

    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_layers = 2;
    std::size_t d_ff = 256;

    TrainConfig train;

    json to_json() const {
        return json{{"max_len", max_len},
                    {"k", k},
                    {"b", b},
                    {"seed", seed},
                    {"min_count", min_count},
                    {"lexicon", lexicon},
                    {"d_model", d_model},
                    {"n_heads", n_heads},
                    {"n_layers", n_layers},
                    {"d_ff", d_ff},
                    {"epochs", train.epochs},
                    {"batch_size", train.batch_size},
                    {"lr", train.lr},
                    {"warmup_steps", train.warmup_steps},
                    {"total_steps", train.total_steps},
                    {"weight_decay", train.weight_decay},
                    {"adam_beta1", train.adam_beta1},
                    {"adam_beta2", train.adam_beta2},
                    {"adam_eps", train.adam_eps},
                    {"clip_norm", train.clip_norm},
                    {"val_fraction", train.val_fraction},
                    {"grad_check", train.grad_check}};
    }

    void apply_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("malformed config file " + path + ": " + e.what());
        }
        const json known = to_json();
        for (const auto& [key, value] : j.items()) {
            if (!known.contains(key)) throw ConfigError("unknown config key: " + key);
            try {
                if (key == "max_len") max_len = value.get<std::size_t>();
                else if (key == "k") k = value.get<std::size_t>();
                else if (key == "b") b = value.get<std::size_t>();
                else if (key == "seed") seed = value.get<std::uint64_t>();
                else if (key == "min_count") min_count = value.get<int>();
                else if (key == "lexicon") lexicon = value.get<std::string>();
                else if (key == "d_model") d_model = value.get<std::size_t>();
                else if (key == "n_heads") n_heads = value.get<std::size_t>();
                else if (key == "n_layers") n_layers = value.get<std::size_t>();
                else if (key == "d_ff") d_ff = value.get<std::size_t>();
                else if (key == "epochs") train.epochs = value.get<std::size_t>();
                else if (key == "batch_size") train.batch_size = value.get<std::size_t>();
                else if (key == "lr") train.lr = value.get<double>();
                else if (key == "warmup_steps") train.warmup_steps = value.get<std::size_t>();
                else if (key == "total_steps") train.total_steps = value.get<std::size_t>();
                else if (key == "weight_decay") train.weight_decay = value.get<double>();
                else if (key == "adam_beta1") train.adam_beta1 = value.get<double>();
                else if (key == "adam_beta2") train.adam_beta2 = value.get<double>();
                else if (key == "adam_eps") train.adam_eps = value.get<double>();
                else if (key == "clip_norm") train.clip_norm = value.get<double>();
                else if (key == "val_fraction") train.val_fraction = value.get<double>();
                else if (key == "grad_check") train.grad_check = value.get<bool>();
            } catch (const json::exception& e) {
                throw ConfigError("bad value for config key " + key + ": " + e.what());
            }
        }
    }

    void finalize() {
        train.seed = seed;
        train.k = k;
        train.beam_b = b;
    }

    // Provenance: merged config echoed next to every output file.
    void echo(const std::string& out_path) const {
        const fs::path dir = fs::path(out_path).parent_path();
        const fs::path target = (dir.empty() ? fs::path(".") : dir) / "config.json";
        std::ofstream out(target);
        if (out) out << to_json().dump(2) << '\n';
    }
};

RuleTagger make_tagger(const RunConfig& cfg) {
    if (cfg.lexicon.empty()) return RuleTagger{};
    return RuleTagger::from_lexicon_file(cfg.lexicon);
}

json rouge_json(const RougeScore& s) {
    return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

int cmd_gen(const RunConfig& cfg, std::size_t n, const std::string& out,
            const std::string& lexicon_out) {
    const SynthCorpus corpus = generate_synthetic_corpus(n, cfg.seed);
    write_pairs_jsonl(out, corpus.documents());
    if (!lexicon_out.empty()) {
        std::ofstream lex(lexicon_out);
        if (!lex) throw std::runtime_error("cannot open lexicon output: " + lexicon_out);
        for (const auto& c : synthetic_proper_lexicon()) lex << c << '\n';
    }
    cfg.echo(out);
    std::cout << "generated " << corpus.pairs.size() << " pairs (mean planted entities "
              << corpus.mean_planted() << ")\n";
    return 0;
}

int cmd_build_data(const RunConfig& cfg, const std::string& pairs_path,
                   const std::string& vocab_out, const std::string& variant,
                   const std::string& out, const std::string& report_out) {
    const auto pairs = read_pairs_jsonl(pairs_path);
    std::vector<std::string> docs;
    for (const auto& p : pairs) {
        docs.push_back(p.source);
        docs.push_back(p.summary);
    }
    const Vocabulary vocab = build_vocab(docs, cfg.min_count);
    vocab.save(vocab_out);

    const RuleTagger tagger = make_tagger(cfg);
    BuildReport report;
    std::vector<SpanExample> examples;
    for (const auto& p : pairs) {
        const TokenizedText source = tokenize(p.source, vocab);
        const TokenizedText summary = tokenize(p.summary, vocab);
        if (variant == "single") {
            auto built = build_single_mask_examples(source, summary, tagger, cfg.max_len, report);
            examples.insert(examples.end(), built.begin(), built.end());
        } else {
            auto built = build_all_mask_example(source, summary, tagger, cfg.max_len, report);
            if (built) examples.push_back(std::move(*built));
        }
    }
    write_examples_jsonl(out, examples);
    if (!report_out.empty()) {
        std::ofstream rep(report_out);
        rep << report.to_string();
    }
    cfg.echo(out);
    std::cout << report.to_string();
    return 0;
}

int cmd_corrupt(const RunConfig& cfg, const std::string& pairs_path, double rate,
                const std::string& out, const std::string& log_out) {
    const auto pairs = read_pairs_jsonl(pairs_path);
    std::vector<std::string> docs;
    for (const auto& p : pairs) {
        docs.push_back(p.source);
        docs.push_back(p.summary);
    }
    const Vocabulary vocab = build_vocab(docs, 1);
    const RuleTagger tagger = make_tagger(cfg);

    EntityPool pool;
    for (const auto& p : pairs)
        for (const auto& e : tagger.tag(tokenize(p.source, vocab))) pool.add(e);

    std::vector<DocumentPair> corrupted;
    std::vector<DocCorruptionLog> logs;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const TokenizedText source = tokenize(pairs[i].source, vocab);
        const TokenizedText summary = tokenize(pairs[i].summary, vocab);
        const std::uint64_t doc_seed = cfg.seed + i * 0x9E3779B97F4A7C15ull;
        CorruptionResult r = corrupt_summary(source, summary, rate, doc_seed, tagger, &pool);
        corrupted.push_back({pairs[i].doc_id, pairs[i].source, r.corrupted_raw});
        if (!r.records.empty()) logs.push_back({pairs[i].doc_id, std::move(r.records)});
    }
    write_pairs_jsonl(out, corrupted);
    write_corruption_log_jsonl(log_out, logs);
    cfg.echo(out);
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& examples_path,
              const std::string& vocab_path, const std::string& variant,
              const std::string& out_dir) {
    const Vocabulary vocab = Vocabulary::load(vocab_path);
    const auto dataset = read_examples_jsonl(examples_path);
    EncoderConfig enc;
    enc.vocab_size = vocab.size();
    enc.d_model = cfg.d_model;
    enc.n_heads = cfg.n_heads;
    enc.n_layers = cfg.n_layers;
    enc.d_ff = cfg.d_ff;
    enc.max_len = cfg.max_len;

    fs::create_directories(out_dir);
    std::ofstream log(fs::path(out_dir) / "train_log.csv");
    const ModelVariant mv =
        variant == "qa" ? ModelVariant::QaSpan : ModelVariant::Autoregressive;
    const TrainResult result = train_model(dataset, cfg.train, mv, enc, out_dir, &log);
    cfg.echo(out_dir + "/x");
    std::cout << "steps=" << result.steps << " final_loss=" << result.final_loss
              << " best_val_exact=" << result.best_val_exact << " best=" << result.best_checkpoint
              << "\n";
    return 0;
}

int cmd_correct(const RunConfig& cfg, const std::string& model_path,
                const std::string& vocab_path, const std::string& pairs_path,
                const std::string& engine, const std::string& out) {
    const Vocabulary vocab = Vocabulary::load(vocab_path);
    const RuleTagger tagger = make_tagger(cfg);
    const auto pairs = read_pairs_jsonl(pairs_path);

    std::optional<QaModel> qa;
    std::optional<ArModel> ar;
    if (engine == "qa")
        qa = QaModel::load(model_path);
    else
        ar = ArModel::load(model_path);

    std::ofstream outf(out, std::ios::binary);
    if (!outf) throw std::runtime_error("cannot open output: " + out);
    for (const auto& p : pairs) {
        const TokenizedText source = tokenize(p.source, vocab);
        const TokenizedText summary = tokenize(p.summary, vocab);
        const CorrectionTrace trace =
            engine == "qa"
                ? correct_iterative(source, summary, tagger, make_predictor(*qa, cfg.k),
                                    cfg.max_len)
                : correct_autoregressive(source, summary, tagger,
                                         make_predictor(*ar, cfg.b, cfg.k), cfg.max_len);
        json jtrace = json::array();
        for (const auto& r : trace.records)
            jtrace.push_back(json{{"entity", r.original},
                                  {"predicted", r.substituted},
                                  {"logprob", r.logprob},
                                  {"sentinel", r.sentinel}});
        json j{{"doc_id", p.doc_id},
               {"original", p.summary},
               {"corrected", trace.corrected_raw},
               {"trace", jtrace},
               {"engine", trace.engine}};
        outf << j.dump() << '\n';
    }
    cfg.echo(out);
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& corrected_path,
                 const std::string& pairs_path, const std::string& log_path,
                 const std::string& out, bool per_doc) {
    const auto refs = read_pairs_jsonl(pairs_path);
    std::map<std::string, const DocumentPair*> ref_by_id;
    for (const auto& p : refs) ref_by_id[p.doc_id] = &p;

    std::ifstream in(corrected_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corrected file: " + corrected_path);

    const RuleTagger tagger = make_tagger(cfg);
    std::vector<std::string> docs;
    for (const auto& p : refs) {
        docs.push_back(p.source);
        docs.push_back(p.summary);
    }
    const Vocabulary vocab = build_vocab(docs, 1);

    struct Acc {
        double r1 = 0, r2 = 0, rl = 0, tf1 = 0, ep = 0;
        RougeScore r1s, r2s, rls;
    };
    double pre_r1 = 0, pre_r2 = 0, pre_rl = 0, pre_tf1 = 0, pre_ep = 0;
    double post_r1 = 0, post_r2 = 0, post_rl = 0, post_tf1 = 0, post_ep = 0;
    std::size_t n_docs = 0;
    DocEntityOutcomes outcomes;
    json per_doc_json = json::array();

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(corrected_path + ":" + std::to_string(lineno) +
                                     ": malformed JSON line: " + e.what());
        }
        const std::string doc_id = j.at("doc_id").get<std::string>();
        auto it = ref_by_id.find(doc_id);
        if (it == ref_by_id.end())
            throw std::runtime_error("corrected doc_id not in reference pairs: " + doc_id);
        const DocumentPair& ref = *it->second;
        const std::string original = j.at("original").get<std::string>();
        const std::string corrected = j.at("corrected").get<std::string>();

        const auto ref_tokens = split_words(ref.summary);
        const auto pre_tokens = split_words(original);
        const auto post_tokens = split_words(corrected);
        const TokenizedText source_tok = tokenize(ref.source, vocab);

        const RougeScore p1 = rouge_n(pre_tokens, ref_tokens, 1);
        const RougeScore p2 = rouge_n(pre_tokens, ref_tokens, 2);
        const RougeScore pl = rouge_l(pre_tokens, ref_tokens);
        const RougeScore q1 = rouge_n(post_tokens, ref_tokens, 1);
        const RougeScore q2 = rouge_n(post_tokens, ref_tokens, 2);
        const RougeScore ql = rouge_l(post_tokens, ref_tokens);
        const double ptf = token_f1(original, ref.summary);
        const double qtf = token_f1(corrected, ref.summary);
        const double pep = entity_precision(tokenize(original, vocab), source_tok, tagger);
        const double qep = entity_precision(tokenize(corrected, vocab), source_tok, tagger);

        pre_r1 += p1.f1; pre_r2 += p2.f1; pre_rl += pl.f1; pre_tf1 += ptf; pre_ep += pep;
        post_r1 += q1.f1; post_r2 += q2.f1; post_rl += ql.f1; post_tf1 += qtf; post_ep += qep;
        ++n_docs;

        auto& outc = outcomes[doc_id];
        for (const auto& t : j.at("trace"))
            outc.emplace_back(t.at("entity").get<std::string>(),
                              t.at("predicted").get<std::string>());

        if (per_doc)
            per_doc_json.push_back(json{{"doc_id", doc_id},
                                        {"pre", {{"rouge1", rouge_json(p1)},
                                                 {"rouge2", rouge_json(p2)},
                                                 {"rougeL", rouge_json(pl)},
                                                 {"token_f1", ptf},
                                                 {"entity_precision", pep}}},
                                        {"post", {{"rouge1", rouge_json(q1)},
                                                  {"rouge2", rouge_json(q2)},
                                                  {"rougeL", rouge_json(ql)},
                                                  {"token_f1", qtf},
                                                  {"entity_precision", qep}}}});
    }
    if (n_docs == 0) throw std::runtime_error("no corrected documents to evaluate");

    const double dn = static_cast<double>(n_docs);
    json report{{"counts", {{"docs", n_docs}}},
                {"pre",
                 {{"rouge1_f1", pre_r1 / dn},
                  {"rouge2_f1", pre_r2 / dn},
                  {"rougeL_f1", pre_rl / dn},
                  {"token_f1", pre_tf1 / dn},
                  {"entity_precision", pre_ep / dn}}},
                {"post",
                 {{"rouge1_f1", post_r1 / dn},
                  {"rouge2_f1", post_r2 / dn},
                  {"rougeL_f1", post_rl / dn},
                  {"token_f1", post_tf1 / dn},
                  {"entity_precision", post_ep / dn}}}};
    if (!log_path.empty()) {
        const auto logs = read_corruption_log_jsonl(log_path);
        const RestorationResult rest = restoration_rate(outcomes, logs);
        report["restoration"] = json{{"restoration_rate", rest.restoration_rate},
                                     {"false_change_rate", rest.false_change_rate},
                                     {"corrupted", rest.corrupted},
                                     {"restored", rest.restored},
                                     {"uncorrupted", rest.uncorrupted},
                                     {"false_changes", rest.false_changes}};
    }
    if (per_doc) report["per_doc"] = per_doc_json;

    std::ofstream outf(out);
    if (!outf) throw std::runtime_error("cannot open report output: " + out);
    outf << report.dump(2) << '\n';
    cfg.echo(out);
    std::cout << report.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spanfact: span-selection fact correction for summaries"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    bool show_version = false;
    app.add_flag("--version", show_version, "print checkpoint format version");

    std::string config_path;
    app.add_option("--config", config_path, "flat JSON config file");

    RunConfig cfg;
    // flag overrides, applied after the config file
    std::optional<std::size_t> f_max_len, f_k, f_b, f_epochs, f_batch;
    std::optional<std::uint64_t> f_seed;
    std::optional<double> f_lr, f_rate;
    std::optional<std::string> f_lexicon;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--max-len", f_max_len, "packed input length cap");
        sub->add_option("--seed", f_seed, "random seed");
        sub->add_option("--lexicon", f_lexicon, "proper-noun lexicon file");
    };

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic template corpus");
    std::size_t gen_n = 200;
    std::string gen_out, gen_lex_out;
    gen->add_option("--n", gen_n, "number of pairs");
    gen->add_option("--out", gen_out, "output pairs JSONL")->required();
    gen->add_option("--lexicon-out", gen_lex_out, "write the proper-noun lexicon here");
    add_common(gen);

    // build-data
    auto* build = app.add_subcommand("build-data", "build span-selection examples");
    std::string bd_pairs, bd_vocab, bd_variant = "single", bd_out, bd_report;
    build->add_option("--pairs", bd_pairs)->required();
    build->add_option("--vocab", bd_vocab, "vocabulary output file")->required();
    build->add_option("--variant", bd_variant)->check(CLI::IsMember({"single", "all"}));
    build->add_option("--out", bd_out)->required();
    build->add_option("--report", bd_report, "build report output file");
    add_common(build);

    // corrupt
    auto* corrupt = app.add_subcommand("corrupt", "inject entity corruptions into summaries");
    std::string co_pairs, co_out, co_log;
    double co_rate = 0.3;
    corrupt->add_option("--pairs", co_pairs)->required();
    corrupt->add_option("--rate", f_rate, "per-entity corruption probability");
    corrupt->add_option("--out", co_out)->required();
    corrupt->add_option("--log", co_log)->required();
    add_common(corrupt);

    // train
    auto* train = app.add_subcommand("train", "train a correction model");
    std::string tr_examples, tr_vocab, tr_variant = "qa", tr_out;
    train->add_option("--examples", tr_examples)->required();
    train->add_option("--vocab", tr_vocab)->required();
    train->add_option("--variant", tr_variant)->check(CLI::IsMember({"qa", "ar"}));
    train->add_option("--out", tr_out)->required();
    train->add_option("--epochs", f_epochs);
    train->add_option("--batch-size", f_batch);
    train->add_option("--lr", f_lr);
    add_common(train);

    // correct
    auto* correct = app.add_subcommand("correct", "correct draft summaries");
    std::string cr_model, cr_vocab, cr_pairs, cr_engine = "qa", cr_out;
    correct->add_option("--model", cr_model)->required();
    correct->add_option("--vocab", cr_vocab)->required();
    correct->add_option("--pairs", cr_pairs)->required();
    correct->add_option("--engine", cr_engine)->check(CLI::IsMember({"qa", "ar"}));
    correct->add_option("--out", cr_out)->required();
    correct->add_option("--k", f_k);
    correct->add_option("--b", f_b);
    add_common(correct);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score corrected summaries");
    std::string ev_corrected, ev_pairs, ev_log, ev_out;
    bool ev_per_doc = false;
    evaluate->add_option("--corrected", ev_corrected)->required();
    evaluate->add_option("--pairs", ev_pairs)->required();
    evaluate->add_option("--log", ev_log, "corruption log (enables restoration metrics)");
    evaluate->add_option("--out", ev_out)->required();
    evaluate->add_flag("--per-doc", ev_per_doc, "include per-document breakdown");
    add_common(evaluate);

    CLI11_PARSE(app, argc, argv);

    if (show_version) {
        std::cout << "checkpoint-format-version " << kCheckpointVersion << "\n";
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cout << app.help();
        return 0;
    }

    try {
        if (!config_path.empty()) cfg.apply_file(config_path);
        if (f_max_len) cfg.max_len = *f_max_len;
        if (f_seed) cfg.seed = *f_seed;
        if (f_lexicon) cfg.lexicon = *f_lexicon;
        if (f_k) cfg.k = *f_k;
        if (f_b) cfg.b = *f_b;
        if (f_epochs) cfg.train.epochs = *f_epochs;
        if (f_batch) cfg.train.batch_size = *f_batch;
        if (f_lr) cfg.train.lr = *f_lr;
        if (f_rate) co_rate = *f_rate;
        cfg.finalize();

        if (gen->parsed()) return cmd_gen(cfg, gen_n, gen_out, gen_lex_out);
        if (build->parsed()) return cmd_build_data(cfg, bd_pairs, bd_vocab, bd_variant, bd_out, bd_report);
        if (corrupt->parsed()) return cmd_corrupt(cfg, co_pairs, co_rate, co_out, co_log);
        if (train->parsed()) return cmd_train(cfg, tr_examples, tr_vocab, tr_variant, tr_out);
        if (correct->parsed()) return cmd_correct(cfg, cr_model, cr_vocab, cr_pairs, cr_engine, cr_out);
        if (evaluate->parsed())
            return cmd_evaluate(cfg, ev_corrected, ev_pairs, ev_log, ev_out, ev_per_doc);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 4;
    } catch (const TrainingDiverged& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
