#include "spanfact/synth.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace spanfact {

namespace {

const std::vector<std::string>& months() {
    static const std::vector<std::string> m = {"january", "february", "march",     "april",
                                               "may",     "june",     "july",      "august",
                                               "september", "october", "november", "december"};
    return m;
}

struct Fillers {
    std::string n1, n2, n3;
    std::string c1, c2, c3;
    std::string date;  // "<day> <month> <year>"
};

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

std::string fill(const std::string& tpl, const Fillers& f) {
    std::string out = tpl;
    out = replace_all(out, "{n1}", f.n1);
    out = replace_all(out, "{n2}", f.n2);
    out = replace_all(out, "{n3}", f.n3);
    out = replace_all(out, "{c1}", f.c1);
    out = replace_all(out, "{c2}", f.c2);
    out = replace_all(out, "{c3}", f.c3);
    out = replace_all(out, "{date}", f.date);
    return out;
}

struct Template {
    const char* source;
    const char* summary;
    std::size_t planted;
};

const std::vector<Template>& templates() {
    static const std::vector<Template> t = {
        {"{n1} people were killed and {n2} others injured when a fire swept through a market "
         "in {c1} on {date} . rescue teams said {n3} homes were destroyed in the blaze .",
         "{n1} killed , {n2} injured in {c1} market fire", 3},
        {"officials in {c1} reported {n1} new cases of flu on {date} . hospitals treated {n2} "
         "patients and sent {n3} people home .",
         "{c1} reports {n1} flu cases on {date}", 3},
        {"the {c1} council approved a budget of {n1} million dollars on {date} . the plan will "
         "fund {n2} projects across the city , a spokesman said .",
         "{c1} approves {n1} million dollars budget to fund {n2} projects", 3},
        {"{c1} beat {c2} by {n1} points in the cup final in {c3} on {date} . about {n2} fans "
         "watched the match .",
         "{c1} beats {c2} by {n1} points in cup final", 3},
    };
    return t;
}

}  // namespace

const std::vector<std::string>& synthetic_proper_lexicon() {
    static const std::vector<std::string> cities = {
        "arlington", "bakersfield", "camford",  "dunmore",  "eastvale", "fairview",
        "glenwood",  "harlow",      "ironton",  "jasperton", "kelsey",  "lakewood"};
    return cities;
}

double SynthCorpus::mean_planted() const {
    if (pairs.empty()) return 0.0;
    std::size_t total = 0;
    for (const auto& p : pairs) total += p.planted;
    return static_cast<double>(total) / static_cast<double>(pairs.size());
}

std::vector<DocumentPair> SynthCorpus::documents() const {
    std::vector<DocumentPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.pair);
    return out;
}

SynthCorpus generate_synthetic_corpus(std::size_t n_pairs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto& cities = synthetic_proper_lexicon();
    std::uniform_int_distribution<int> num(3, 30);
    std::uniform_int_distribution<int> day(1, 28);
    std::uniform_int_distribution<int> year(2012, 2016);
    std::uniform_int_distribution<std::size_t> month(0, months().size() - 1);

    SynthCorpus corpus;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const Template& tpl = templates()[i % templates().size()];

        Fillers f;
        // all numeric tokens in a pair distinct, so gold spans are unique
        std::set<int> used;
        auto draw_num = [&]() {
            int v = num(rng);
            while (used.count(v)) v = num(rng);
            used.insert(v);
            return std::to_string(v);
        };
        f.n1 = draw_num();
        f.n2 = draw_num();
        f.n3 = draw_num();
        int d = day(rng);
        while (used.count(d)) d = day(rng);
        used.insert(d);
        f.date = std::to_string(d) + " " + months()[month(rng)] + " " + std::to_string(year(rng));

        std::vector<std::size_t> city_idx(cities.size());
        for (std::size_t c = 0; c < city_idx.size(); ++c) city_idx[c] = c;
        std::shuffle(city_idx.begin(), city_idx.end(), rng);
        f.c1 = cities[city_idx[0]];
        f.c2 = cities[city_idx[1]];
        f.c3 = cities[city_idx[2]];

        std::ostringstream id;
        id << "doc" << i;
        corpus.pairs.push_back(
            {{id.str(), fill(tpl.source, f), fill(tpl.summary, f)}, tpl.planted});
    }
    return corpus;
}

}  // namespace spanfact
