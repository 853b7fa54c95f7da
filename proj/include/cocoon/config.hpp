#pragma once

#include <cstdint>
#include <string>

#include "cocoon/corpus.hpp"
#include "cocoon/simloop.hpp"

namespace cocoon {

struct CorpusSource {
    enum class Kind { Synthetic, Mind, Directory };
    Kind kind = Kind::Synthetic;
    SynthConfig synth;            // seed is taken from RunConfig::seed
    std::string news_path;        // Mind
    std::string behaviors_path;   // Mind
    std::string directory;        // Directory: news.tsv + behaviors.tsv

    bool operator==(const CorpusSource&) const = default;
};

struct RunConfig {
    std::uint64_t seed = 42;
    std::string out;
    CorpusSource corpus;
    SimConfig sim;  // recommender, training, strategy and loop settings

    // Sim config with the run seed pushed into every seeded part.
    SimConfig resolved_sim() const;
    SynthConfig resolved_synth() const;
};

// Missing keys take defaults; unknown keys and wrong types throw ConfigError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Every key written out; feeding the text back reproduces it.
std::string run_config_json(const RunConfig& cfg);

// Canonical text of the parts that must agree for two runs to be compared.
std::string comparable_config(const RunConfig& cfg);
std::string comparable_config_text(const std::string& json_text);

Corpus load_corpus(const RunConfig& cfg);

}  // namespace cocoon
