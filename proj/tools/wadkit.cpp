// wadkit: command-line front end for the whisper mining pipeline.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "wadkit/detector.hpp"
#include "wadkit/labeller_server.hpp"
#include "wadkit/models/io.hpp"
#include "wadkit/report.hpp"
#include "wadkit/synth.hpp"

#include "CLI11.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wadkit;

namespace {

constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Digests

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(Error::Category::other, "SHA-256 failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

std::string sha256_file(const fs::path& p) { return sha256_hex(detail::slurp(p)); }

// A directory digests as the hash of its sorted "relative-path  file-hash" lines.
json digest_path(const fs::path& p) {
    if (!fs::exists(p)) throw MissingInputError("missing input " + p.string());
    if (!fs::is_directory(p)) return {{"path", p.string()}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}};
    std::vector<std::string> lines;
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (!e.is_regular_file()) continue;
        lines.push_back(fs::relative(e.path(), p).generic_string() + "  " + sha256_file(e.path()));
        ++files;
    }
    std::sort(lines.begin(), lines.end());
    std::string all;
    for (const auto& l : lines) all += l + "\n";
    return {{"path", p.string()}, {"sha256", sha256_hex(all)}, {"files", files}};
}

// ---------------------------------------------------------------------------
// Layered settings: built-in defaults < config file < WADKIT_* environment < flags.

struct Setting {
    std::string def;
    bool multi = false;
    bool required = false;
    CLI::Option* opt = nullptr;
};

struct Command {
    std::string name;
    CLI::App* app = nullptr;
    std::map<std::string, Setting> settings;
    std::function<void(struct Run&)> body;
};

std::string env_name(const std::string& section, const std::string& key) {
    std::string s = "WADKIT_" + (section.empty() ? "" : section + "_") + key;
    for (auto& c : s) c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) {
        cur.erase(0, cur.find_first_not_of(" \t"));
        cur.erase(cur.find_last_not_of(" \t") + 1);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

std::string norm_key(std::string k) {
    std::replace(k.begin(), k.end(), '_', '-');
    return k;
}

using FileConfig = std::map<std::string, std::map<std::string, std::vector<std::string>>>;

FileConfig read_config_file(const fs::path& path, const std::map<std::string, Command*>& commands,
                            const std::map<std::string, Setting>& global) {
    if (!fs::exists(path)) throw MissingInputError("missing config file " + path.string());
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_file(path.string());
    } catch (const CLI::Error& e) {
        throw UsageError("invalid config file " + path.string() + ": " + e.what());
    }
    FileConfig out;
    for (const auto& it : items) {
        if (it.name == "++" || it.name == "--") continue;  // section markers
        std::string section = it.parents.empty() ? "" : it.parents.front();
        if (section == "default" || section == "wadkit") section.clear();
        if (it.parents.size() > 1) throw UsageError("config: nested section " + it.fullname() + " not supported");
        const auto key = norm_key(it.name);
        const auto& known = section.empty() ? global : [&]() -> const std::map<std::string, Setting>& {
            auto c = commands.find(section);
            if (c == commands.end()) throw UsageError("config: unknown section [" + section + "]");
            return c->second->settings;
        }();
        if (!known.contains(key))
            throw UsageError("config: unknown key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
        std::vector<std::string> vals;
        for (const auto& v : it.inputs)
            for (const auto& x : split_list(v)) vals.push_back(x);
        out[section][key] = vals;
    }
    return out;
}

using Values = std::map<std::string, std::vector<std::string>>;

Values resolve(const std::string& section, const std::map<std::string, Setting>& settings, const FileConfig& file) {
    Values out;
    for (const auto& [key, s] : settings) {
        std::vector<std::string> v;
        if (s.opt && s.opt->count() > 0) {
            for (const auto& r : s.opt->results())
                for (const auto& x : s.multi ? split_list(r) : std::vector<std::string>{r}) v.push_back(x);
        } else if (const char* env = std::getenv(env_name(section, key).c_str()); env && *env) {
            v = s.multi ? split_list(env) : std::vector<std::string>{env};
        } else if (auto sec = file.find(section); sec != file.end() && sec->second.contains(key)) {
            v = sec->second.at(key);
            if (!s.multi && v.size() > 1) throw UsageError("config: '" + key + "' takes a single value");
            if (!s.multi && v.empty()) v.push_back("");
        } else if (!s.def.empty()) {
            v = s.multi ? split_list(s.def) : std::vector<std::string>{s.def};
        }
        if (s.required && (v.empty() || v.front().empty()))
            throw UsageError("missing required setting --" + key + (section.empty() ? "" : " for " + section));
        out[key] = v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// One invocation: resolved settings plus the provenance being collected.

struct Run {
    std::string command;
    Values values, global;
    std::set<std::string> multi;
    json inputs = json::array();
    json outputs = json::array();
    json seeds = json::object();
    std::size_t workers = 1;

    bool has(const std::string& k) const { return values.contains(k) && !values.at(k).empty() && !values.at(k).front().empty(); }

    std::string str(const std::string& k) const {
        const auto& v = values.at(k);
        return v.empty() ? std::string{} : v.front();
    }

    std::vector<std::string> list(const std::string& k) const { return values.at(k); }

    double num(const std::string& k) const {
        try {
            std::size_t pos = 0;
            const double d = std::stod(str(k), &pos);
            if (pos != str(k).size()) throw std::invalid_argument(k);
            return d;
        } catch (const std::logic_error&) {
            throw UsageError("--" + k + " expects a number, got '" + str(k) + "'");
        }
    }

    std::size_t count(const std::string& k) const {
        const double d = num(k);
        if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d)))
            throw UsageError("--" + k + " expects a non-negative integer, got '" + str(k) + "'");
        return static_cast<std::size_t>(d);
    }

    std::uint64_t seed(const std::string& k) {
        const auto s = static_cast<std::uint64_t>(count(k));
        seeds[k] = s;
        return s;
    }

    bool flag(const std::string& k) const {
        const auto v = str(k);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off" || v.empty()) return false;
        throw UsageError("--" + k + " expects true or false, got '" + v + "'");
    }

    std::vector<double> numbers(const std::string& k) const {
        std::vector<double> out;
        for (const auto& s : list(k)) {
            try {
                out.push_back(std::stod(s));
            } catch (const std::logic_error&) {
                throw UsageError("--" + k + " expects numbers, got '" + s + "'");
            }
        }
        return out;
    }

    fs::path input(const std::string& k) {
        const fs::path p = str(k);
        inputs.push_back(digest_path(p));
        return p;
    }

    std::vector<fs::path> inputs_of(const std::string& k) {
        std::vector<fs::path> out;
        for (const auto& s : list(k)) {
            inputs.push_back(digest_path(s));
            out.emplace_back(s);
        }
        return out;
    }

    // Manifest file plus every mixture and label file it references.
    CorpusManifest manifest(const std::string& k) {
        const fs::path p = input(k);
        auto m = read_manifest(p);
        std::string all;
        for (const auto& e : m.entries)
            for (const auto& f : {e.mixture_path, e.label_path}) {
                const auto q = m.resolve(f);
                if (!fs::exists(q)) throw MissingInputError("manifest " + p.string() + " references missing " + q.string());
                all += f + "  " + sha256_file(q) + "\n";
            }
        inputs.push_back({{"path", p.string() + " (referenced files)"}, {"sha256", sha256_hex(all)}, {"files", 2 * m.entries.size()}});
        return m;
    }

    Model model(const std::string& k) { return load_model(input(k)); }

    void output(const fs::path& p) { outputs.push_back(p.string()); }

    json provenance() const {
        auto value = [&](const std::string& k, const std::vector<std::string>& v) {
            if (multi.contains(k)) return json(v);
            return v.empty() ? json() : json(v.front());
        };
        json cfg = json::object();
        for (const auto& [k, v] : global) cfg["global"][k] = value(k, v);
        for (const auto& [k, v] : values) cfg[command][k] = value(k, v);
        json out_digests = json::array();
        for (const auto& o : outputs) {
            const fs::path p = o.get<std::string>();
            if (fs::exists(p)) out_digests.push_back(digest_path(p));
        }
        return {{"tool", "wadkit"},
                {"version", kVersion},
                {"command", command},
                {"config", cfg},
                {"config_sha256", sha256_hex(cfg.dump())},
                {"seeds", seeds},
                {"inputs", inputs},
                {"outputs", out_digests}};
    }
};

void write_provenance(const Run& run, const fs::path& where) {
    const fs::path p = fs::is_directory(where) ? where / "provenance.json" : fs::path(where.string() + ".provenance.json");
    if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
    detail::spit(p, run.provenance().dump(2) + "\n");
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

AudioBuffer load_16k(const fs::path& p) {
    auto a = load_wav(p);
    return a.sample_rate_hz == 16000 ? a : resample(a, 16000);
}

std::vector<fs::path> wavs_in(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw MissingInputError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

ModelSpec spec_from(Run& r) {
    ModelSpec s;
    s.kind = model_kind_from_string(r.str("model"));
    s.epochs = r.count("epochs");
    s.learning_rate = r.num("learning-rate");
    s.batch_size = r.count("batch-size");
    s.patience = r.count("patience");
    s.seed = r.seed("seed");
    s.seq_len = r.count("seq-len");
    s.seq_stride = r.count("seq-stride");
    s.lstm_layers = r.count("lstm-layers");
    s.lstm_hidden = r.count("lstm-hidden");
    s.mlp_layers.clear();
    for (double w : r.numbers("mlp-layers")) s.mlp_layers.push_back(static_cast<std::size_t>(w));
    s.svm_lambda = r.num("svm-lambda");
    s.class_weighting = r.flag("class-weighting");
    s.task = r.str("task");
    if (s.task != "wad" && s.task != "cwad") throw UsageError("--task must be wad or cwad");
    s.validate();
    return s;
}

const std::set<std::string>& positives_for(const std::string& task) {
    if (task == "wad") return wad_positive_labels();
    if (task == "cwad") return cwad_positive_labels();
    throw UsageError("--task must be wad or cwad");
}

std::vector<Split> splits_from(const Run& r, const std::string& k) {
    std::vector<Split> out;
    for (const auto& s : r.list(k)) out.push_back(split_from_string(s));
    if (out.empty()) throw UsageError("--" + k + " needs at least one split");
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_featurize(Run& r) {
    const auto out = fs::path(r.str("out-dir"));
    const auto kind = r.str("features");
    if (kind != "rasta-plp" && kind != "mfcc") throw UsageError("--features must be rasta-plp or mfcc");
    const auto ins = r.inputs_of("input");
    fs::create_directories(out);
    parallel_for(ins.size(), r.workers, [&](std::size_t i) {
        const auto a = load_16k(ins[i]);
        const auto f = kind == "mfcc" ? mfcc_features(a) : rasta_plp_features(a);
        write_features(f, out / (stem_of(ins[i]) + ".feat"));
    });
    for (const auto& p : ins) r.output(out / (stem_of(p) + ".feat"));
    std::cout << "featurized " << ins.size() << " file(s) into " << out.string() << "\n";
    write_provenance(r, out);
}

void cmd_build_corpus(Run& r) {
    CorpusConfig c;
    c.clean_dir = r.input("clean-dir");
    c.noise_dir = r.input("noise-dir");
    c.out_dir = r.str("out-dir");
    c.snrs = r.numbers("snrs");
    c.per_combo = r.count("per-combo");
    c.seed = r.seed("seed");
    c.pool = r.str("pool");
    c.workers = r.workers;
    const auto m = build_noisy_corpus(c);
    r.output(c.out_dir / "manifest.jsonl");
    std::cout << "wrote " << m.entries.size() << " mixtures to " << (c.out_dir / "manifest.jsonl").string() << "\n";
    write_provenance(r, c.out_dir);
}

void cmd_train(Run& r) {
    const auto spec = spec_from(r);
    const auto m = r.manifest("manifest");
    const auto& pos = positives_for(spec.task);
    const auto tr = load_labeled(m, m.select({Split::train}), pos, r.workers);
    const auto va = load_labeled(m, m.select({Split::val}), pos, r.workers);
    if (tr.empty()) throw UsageError("manifest has no training entries");
    TrainOptions opts;
    TrainingLog log;
    opts.log = &log;
    opts.on_epoch = [](std::size_t e, double loss, double f1) {
        std::cerr << "epoch " << e + 1 << " loss " << loss << " val_f1 " << f1 << "\n";
    };
    const auto model = train_model(spec, tr, va, opts);
    const fs::path out = r.str("out");
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    save_model(model, out);
    r.output(out);
    std::cout << "trained " << to_string(spec.kind) << ": " << log.epochs_run << " epoch(s), best " << log.best_epoch
              << ", threshold " << model.threshold << " -> " << out.string() << "\n";
    write_provenance(r, out);
}

void cmd_eval(Run& r) {
    const auto m = r.manifest("manifest");
    std::vector<Model> models;
    std::vector<std::string> names;
    for (const auto& p : r.inputs_of("model")) {
        models.push_back(load_model(p));
        names.push_back(stem_of(p));
    }
    EvalOptions eo;
    eo.splits = splits_from(r, "splits");
    eo.positive = positives_for(r.str("task"));
    eo.workers = r.workers;
    for (const auto& spec : r.list("predictions")) {
        // name=dir[:threshold]
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw UsageError("--predictions expects name=dir[:threshold]");
        ExternalPredictions ext{spec.substr(0, eq), spec.substr(eq + 1)};
        if (const auto colon = spec.rfind(':'); colon != std::string::npos && colon > eq) {
            ext.dir = spec.substr(eq + 1, colon - eq - 1);
            ext.threshold = std::stod(spec.substr(colon + 1));
        }
        r.inputs.push_back(digest_path(ext.dir));
        eo.external.push_back(ext);
    }
    if (models.empty() && eo.external.empty()) throw UsageError("eval needs --model or --predictions");
    std::vector<std::pair<std::string, const Model*>> named;
    for (std::size_t i = 0; i < models.size(); ++i) named.emplace_back(names[i], &models[i]);
    const auto rep = evaluate_manifest(m, named, eo);
    std::cout << rep.table();
    if (r.has("out")) {
        const fs::path out = r.str("out");
        if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
        detail::spit(out, rep.to_json().dump(2) + "\n");
        r.output(out);
        write_provenance(r, out);
    }
}

void cmd_detect(Run& r) {
    const auto model = r.model("model");
    const fs::path out = r.str("out-dir");
    const bool audio = r.flag("write-audio");
    const auto ins = r.inputs_of("input");
    fs::create_directories(out);
    parallel_for(ins.size(), r.workers, [&](std::size_t i) {
        const auto rec = load_16k(ins[i]);
        const auto kind = model.spec.task == "cwad" ? "clean_whisper" : "whisper";
        const auto d = detect(rec, model, {}, kind);
        write_segments_csv(d.segments, out / (stem_of(ins[i]) + "_segments.csv"));
        if (audio) write_segment_wavs(rec, of_kind(d.segments, kind), stem_of(ins[i]), out / stem_of(ins[i]));
    });
    for (const auto& p : ins) {
        r.output(out / (stem_of(p) + "_segments.csv"));
        if (audio) r.output(out / stem_of(p));
    }
    std::cout << "segmented " << ins.size() << " recording(s) into " << out.string() << "\n";
    write_provenance(r, out);
}

void cmd_harvest(Run& r) {
    const auto model = r.model("model");
    const fs::path out = r.str("out-dir");
    const auto ins = r.inputs_of("input");
    fs::create_directories(out);
    std::vector<double> secs(ins.size());
    parallel_for(ins.size(), r.workers, [&](std::size_t i) {
        const auto h = harvest_noise(load_16k(ins[i]), model, stem_of(ins[i]), out);
        for (const auto& s : h.noise) secs[i] += s.duration();
    });
    for (std::size_t i = 0; i < ins.size(); ++i)
        std::cout << stem_of(ins[i]) << ": " << fixed6(secs[i]) << " s of noise\n";
    r.output(out);
    write_provenance(r, out);
}

void cmd_augment(Run& r) {
    std::vector<NamedAudio> clean, noises;
    if (r.has("clean-dir"))
        for (const auto& p : wavs_in(r.input("clean-dir"))) clean.push_back({stem_of(p), load_16k(p), ""});
    // Labelled recordings: every clean_whisper interval becomes a segment.
    const auto recs = r.inputs_of("recording");
    if (!recs.empty()) {
        const fs::path labels = r.input("labels-dir");
        for (const auto& rec : recs) {
            const auto csv = labels / (stem_of(rec) + ".csv");
            if (!fs::exists(csv)) throw MissingInputError("no labels for " + rec.string() + " (expected " + csv.string() + ")");
            const auto audio = load_16k(rec);
            for (const auto& iv : read_label_csv(csv).intervals)
                if (iv.label == "clean_whisper")
                    clean.push_back({stem_of(rec) + "_" + std::to_string(std::lround(iv.start_s * 1000)),
                                     audio.slice_seconds(iv.start_s, std::min(iv.end_s, audio.duration_s())), ""});
        }
    }
    for (const auto& dir : r.inputs_of("noise-dir")) {
        const auto type = r.has("noise-type") ? r.str("noise-type") : fs::path(dir).filename().string();
        for (const auto& p : wavs_in(dir)) noises.push_back({stem_of(p), load_16k(p), type});
    }
    AugmentConfig c;
    c.out_dir = r.str("out-dir");
    c.snrs = r.numbers("snrs");
    c.seed = r.seed("seed");
    c.train_fraction = r.num("train-fraction");
    c.val_fraction = r.num("val-fraction");
    c.workers = r.workers;
    const auto res = build_augmented_corpus(clean, noises, c);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    r.output(c.out_dir / "manifest.jsonl");
    std::cout << "wrote " << res.manifest.entries.size() << " entries from " << clean.size() << " clean segment(s) and "
              << noises.size() << " noise recording(s)\n";
    write_provenance(r, c.out_dir);
}

void cmd_finetune(Run& r) {
    const auto base = r.model("base");
    const auto m = r.manifest("manifest");
    FineTuneConfig c;
    c.epochs = r.count("epochs");
    c.learning_rate = r.num("learning-rate");
    if (r.has("seed")) c.seed = r.seed("seed");
    if (r.has("seq-stride")) c.seq_stride = r.count("seq-stride");
    c.workers = r.workers;
    TrainingLog log;
    c.log = &log;
    const auto model = fine_tune_cwad(base, m, c);
    const fs::path out = r.str("out");
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    save_model(model, out);
    r.output(out);
    std::cout << "fine-tuned: " << log.epochs_run << " epoch(s), best " << log.best_epoch << ", threshold "
              << model.threshold << " -> " << out.string() << "\n";
    write_provenance(r, out);
}

void cmd_extract(Run& r) {
    const auto model = r.model("model");
    if (model.spec.task != "cwad") std::cerr << "warning: model task is '" << model.spec.task << "', not cwad\n";
    const fs::path out = r.str("out-dir");
    const auto ins = r.inputs_of("input");
    fs::create_directories(out);
    std::vector<double> secs(ins.size());
    parallel_for(ins.size(), r.workers, [&](std::size_t i) {
        secs[i] = extract_clean_whisper(load_16k(ins[i]), model, stem_of(ins[i]), out).total_s;
    });
    for (std::size_t i = 0; i < ins.size(); ++i)
        std::cout << stem_of(ins[i]) << ": " << fixed6(secs[i]) << " s of clean whisper\n";
    r.output(out);
    write_provenance(r, out);
}

void cmd_serve(Run& r) {
    LabellerServerConfig c;
    c.state_dir = r.str("state-dir");
    c.workers = r.workers;
    fs::create_directories(c.state_dir);
    write_provenance(r, c.state_dir);
    LabellerServer server(c);
    const auto host = r.str("host");
    const auto port = static_cast<int>(r.count("port"));
    std::cout << "labeller listening on http://" << host << ":" << port << std::endl;
    if (!server.listen(host, port)) throw Error(Error::Category::other, "cannot listen on " + host + ":" + std::to_string(port));
}

void cmd_synth(Run& r) {
    const fs::path out = r.str("out-dir");
    synth::CorpusSpec c;
    c.out_dir = out;
    c.seed = r.seed("seed");
    c.utterances_per_speaker = r.count("utterances-per-speaker");
    c.noise_s = r.num("noise-seconds");
    double total = synth::write_wad_corpus(c, r.workers);
    const auto n = r.count("asmr-recordings");
    if (n > 0) fs::create_directories(out / "asmr");
    for (std::size_t i = 0; i < n; ++i) {
        synth::RecordingSpec s;
        s.seconds = r.num("asmr-seconds");
        s.seed = derive_seed(c.seed, "asmr/" + std::to_string(i));
        s.sex = i % 2 ? 'M' : 'F';
        const auto rec = synth::asmr_recording(s);
        const auto id = "asmr" + std::to_string(i);
        write_wav(rec.audio, out / "asmr" / (id + ".wav"));
        write_label_csv(rec.truth, out / "asmr" / (id + "_truth.csv"));
        total += rec.audio.duration_s();
    }
    r.output(out);
    std::cout << "synthesised " << fixed6(total) << " s of audio under " << out.string() << "\n";
    write_provenance(r, out);
}

// ---------------------------------------------------------------------------

struct Cli {
    CLI::App app{"wadkit: whisper activity detection and clean-whisper mining"};
    std::map<std::string, Setting> global;
    std::vector<std::unique_ptr<Command>> commands;
    std::map<std::string, Command*> by_name;

    Command& command(const std::string& name, const std::string& help, std::function<void(Run&)> body) {
        auto c = std::make_unique<Command>();
        c->name = name;
        c->app = app.add_subcommand(name, help);
        c->body = std::move(body);
        by_name[name] = c.get();
        commands.push_back(std::move(c));
        return *commands.back();
    }

    static void add(CLI::App* app, std::map<std::string, Setting>& to, const std::string& key, const std::string& def,
                    const std::string& help, bool multi = false, bool required = false) {
        Setting s{def, multi, required};
        s.opt = app->add_option("--" + key, help);
        if (multi) s.opt->allow_extra_args()->expected(1, CLI::detail::expected_max_vector_size);
        if (!def.empty()) s.opt->default_str(def);
        if (required) s.opt->description(help + " (required)");
        to[key] = s;
    }

    void opt(Command& c, const std::string& key, const std::string& def, const std::string& help) {
        add(c.app, c.settings, key, def, help);
    }
    void req(Command& c, const std::string& key, const std::string& help) { add(c.app, c.settings, key, "", help, false, true); }
    void many(Command& c, const std::string& key, const std::string& def, const std::string& help, bool required = false) {
        add(c.app, c.settings, key, def, help, true, required);
    }

    void model_options(Command& c) {
        const ModelSpec d;
        opt(c, "model", "lstm", "classifier: svm, mlp or lstm");
        opt(c, "task", "wad", "wad (any whisper positive) or cwad (clean whisper positive)");
        opt(c, "epochs", std::to_string(d.epochs), "maximum epochs");
        opt(c, "learning-rate", "0.001", "Adam learning rate");
        opt(c, "batch-size", std::to_string(d.batch_size), "minibatch size");
        opt(c, "patience", std::to_string(d.patience), "early-stopping patience on validation F1");
        opt(c, "seed", "1", "initialisation and shuffling seed");
        opt(c, "seq-len", std::to_string(d.seq_len), "LSTM window length in frames");
        opt(c, "seq-stride", std::to_string(d.seq_stride), "stride between LSTM training windows");
        opt(c, "lstm-layers", std::to_string(d.lstm_layers), "LSTM layers");
        opt(c, "lstm-hidden", std::to_string(d.lstm_hidden), "LSTM units per layer");
        many(c, "mlp-layers", "64,64,8", "MLP hidden layer widths");
        opt(c, "svm-lambda", "0.0001", "SVM L2 regularisation");
        opt(c, "class-weighting", "false", "inverse-frequency class weights in the loss");
    }

    Cli() {
        app.require_subcommand(1);
        app.set_version_flag("--version", kVersion);
        add(&app, global, "config", "", "INI config file ([section] per subcommand)");
        add(&app, global, "workers", std::to_string(default_workers()), "worker threads across utterances");

        auto& f = command("featurize", "extract RASTA-PLP or MFCC features from WAV files", cmd_featurize);
        many(f, "input", "", "input WAV files", true);
        req(f, "out-dir", "output directory for .feat files");
        opt(f, "features", "rasta-plp", "rasta-plp or mfcc");

        auto& b = command("build-corpus", "mix clean whisper with noise at fixed SNRs", cmd_build_corpus);
        req(b, "clean-dir", "clean utterances with index.csv (path,speaker,sex)");
        req(b, "noise-dir", "noise recordings with index.csv (path,noise_type)");
        req(b, "out-dir", "output corpus directory");
        many(b, "snrs", "10,5,0", "SNRs in dB");
        opt(b, "per-combo", "50", "utterances per (noise type, SNR) pair");
        opt(b, "seed", "1", "corpus seed");
        opt(b, "pool", "all", "utterance pool: all, train or test");

        auto& t = command("train", "train a whisper activity detector", cmd_train);
        req(t, "manifest", "corpus manifest.jsonl");
        req(t, "out", "output model file");
        model_options(t);

        auto& e = command("eval", "accuracy/F1/confusion report grouped by split and SNR", cmd_eval);
        req(e, "manifest", "corpus manifest.jsonl");
        many(e, "model", "", "model files (named by file stem)");
        many(e, "predictions", "", "external predictions as name=dir[:threshold]");
        many(e, "splits", "test", "splits to score");
        opt(e, "task", "wad", "wad or cwad labelling of the manifest");
        opt(e, "out", "", "JSON report path");

        auto& d = command("detect", "segment recordings into whisper and noise", cmd_detect);
        req(d, "model", "model file");
        many(d, "input", "", "recordings", true);
        req(d, "out-dir", "output directory");
        opt(d, "write-audio", "false", "also write detected speech segments as WAV");

        auto& h = command("harvest-noise", "cut whisper-free noise from recordings", cmd_harvest);
        req(h, "model", "WAD model file");
        many(h, "input", "", "recordings", true);
        req(h, "out-dir", "output directory");

        auto& a = command("augment", "mix clean whisper with harvested noise for fine-tuning", cmd_augment);
        opt(a, "clean-dir", "", "directory of clean whisper WAV segments");
        many(a, "recording", "", "labelled recordings (clean_whisper intervals are used)");
        opt(a, "labels-dir", "", "label CSVs named <recording stem>.csv (labeller export)");
        many(a, "noise-dir", "", "directories of harvested noise WAVs; directory name is the noise type");
        opt(a, "noise-type", "", "one noise type for every noise directory");
        req(a, "out-dir", "output corpus directory");
        many(a, "snrs", "10,5,0", "SNRs in dB");
        opt(a, "seed", "1", "mixing seed");
        opt(a, "train-fraction", "0.6", "fraction of clean segments for training");
        opt(a, "val-fraction", "0.2", "fraction of clean segments for validation");

        auto& ft = command("finetune-cwad", "fine-tune a WAD LSTM into a clean whisper detector", cmd_finetune);
        req(ft, "base", "WAD LSTM model file");
        req(ft, "manifest", "augmented manifest.jsonl");
        req(ft, "out", "output model file");
        opt(ft, "epochs", "10", "maximum epochs");
        opt(ft, "learning-rate", "0.0001", "Adam learning rate");
        opt(ft, "seed", "", "shuffling seed (default: base model's)");
        opt(ft, "seq-stride", "", "stride between training windows (default: base model's)");

        auto& x = command("extract-clean", "write the clean whisper segments of recordings", cmd_extract);
        req(x, "model", "CWAD model file");
        many(x, "input", "", "recordings", true);
        req(x, "out-dir", "output directory");

        auto& s = command("serve-labeller", "HTTP API for bulk labelling sessions", cmd_serve);
        opt(s, "host", "127.0.0.1", "bind address");
        opt(s, "port", "8080", "port");
        opt(s, "state-dir", "labeller_state", "session logs");

        auto& y = command("synth-corpus", "write the synthetic whisper/trigger corpus", cmd_synth);
        req(y, "out-dir", "output directory");
        opt(y, "seed", "1", "synthesis seed");
        opt(y, "utterances-per-speaker", "4", "whisper utterances per speaker");
        opt(y, "noise-seconds", "60", "seconds per trigger noise recording");
        opt(y, "asmr-recordings", "0", "long ASMR-style recordings with truth labels");
        opt(y, "asmr-seconds", "120", "length of each ASMR-style recording");
    }
};

void print_error(const std::string& category, const std::string& msg) {
    std::cerr << json{{"error", {{"category", category}, {"message", msg}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    Cli cli;
    try {
        cli.app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return cli.app.exit(e);
        print_error("usage", e.what());
        std::cerr << cli.app.help();
        return 2;
    }
    try {
        Command* active = nullptr;
        for (auto& c : cli.commands)
            if (c->app->parsed()) active = c.get();
        FileConfig file;
        Run run;
        const auto boot = resolve("", cli.global, {});
        if (!boot.at("config").empty() && !boot.at("config").front().empty()) {
            file = read_config_file(boot.at("config").front(), cli.by_name, cli.global);
            run.inputs.push_back(digest_path(boot.at("config").front()));
        }
        run.command = active->name;
        run.global = resolve("", cli.global, file);
        run.global.erase("config");
        run.values = resolve(active->name, active->settings, file);
        for (const auto& [k, st] : active->settings)
            if (st.multi) run.multi.insert(k);
        {
            Run tmp;
            tmp.values = run.global;
            run.workers = std::max<std::size_t>(1, tmp.count("workers"));
        }
        active->body(run);
        return 0;
    } catch (const Error& e) {
        const char* names[] = {"usage", "missing_input", "numerical", "format", "other"};
        print_error(names[static_cast<int>(e.category())], e.what());
        return exit_code_for(e);
    } catch (const json::exception& e) {
        print_error("format", e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("other", e.what());
        return 1;
    }
}
