#include <algorithm>
#include <charconv>
#include <cmath>

#include "asat/perception.hpp"

namespace asat::perception {

// Generated from data/awareness_lexicon.tsv.
extern const char* const kBundledLexicon;

namespace {

constexpr std::string_view kNegators[] = {
    "not", "no",    "never",  "without", "dont", "don",    "doesn", "didn",  "isn",
    "aren", "wasn", "weren",  "won",     "cannot", "cant", "hardly", "barely", "nobody"};

// Damping applied to a negated term.
constexpr double kNegationScale = -0.74;
constexpr std::size_t kNegationWindow = 3;

}  // namespace

Lexicon Lexicon::parse(std::string_view tsv) {
    Lexicon lex;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < tsv.size()) {
        auto end = tsv.find('\n', pos);
        if (end == std::string_view::npos) {
            end = tsv.size();
        }
        ++line_no;
        const std::string line = trim(tsv.substr(pos, end - pos));
        pos = end + 1;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError("lexicon line " + std::to_string(line_no) + ": missing tab");
        }
        const std::string token = to_lower(trim(line.substr(0, tab)));
        const std::string value = trim(line.substr(tab + 1));
        double w = 0.0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), w);
        if (token.empty() || ec != std::errc() || ptr != value.data() + value.size() ||
            !std::isfinite(w)) {
            throw ParseError("lexicon line " + std::to_string(line_no) + ": bad entry");
        }
        if (!lex.weights_.emplace(token, w).second) {
            throw ParseError("lexicon line " + std::to_string(line_no) + ": duplicate '" + token + "'");
        }
    }
    return lex;
}

const Lexicon& Lexicon::bundled() {
    static const Lexicon lex = parse(kBundledLexicon);
    return lex;
}

std::optional<double> Lexicon::weight(std::string_view token) const {
    if (auto it = weights_.find(token); it != weights_.end()) {
        return it->second;
    }
    return std::nullopt;
}

bool Lexicon::is_negator(std::string_view token) const {
    return std::find(std::begin(kNegators), std::end(kNegators), token) != std::end(kNegators);
}

double sentiment_awareness(std::string_view text, const Lexicon& lexicon) {
    const auto tokens = ingest::tokenize(text);
    double sum = 0.0;
    std::size_t matched = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto w = lexicon.weight(tokens[i]);
        if (!w) {
            continue;
        }
        double weight = *w;
        for (std::size_t back = 1; back <= kNegationWindow && back <= i; ++back) {
            if (lexicon.is_negator(tokens[i - back])) {
                weight *= kNegationScale;
                break;
            }
        }
        sum += weight;
        ++matched;
    }
    if (matched == 0) {
        return 0.5;
    }
    const double mean = sum / static_cast<double>(matched);
    return 1.0 / (1.0 + std::exp(-mean));
}

}  // namespace asat::perception
