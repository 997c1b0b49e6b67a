#include "prereq/corpus.hpp"
#include "prereq/serialize.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

namespace prereq {

namespace fs = std::filesystem;

std::string_view to_string(Domain d) {
    switch (d) {
        case Domain::NLP: return "NLP";
        case Domain::ML: return "ML";
        case Domain::AI: return "AI";
        case Domain::DL: return "DL";
        case Domain::IR: return "IR";
        case Domain::Other: return "other";
    }
    return "other";
}

Domain parse_domain(std::string_view s) {
    const std::string f = casefold(trim(s));
    if (f == "nlp") return Domain::NLP;
    if (f == "ml") return Domain::ML;
    if (f == "ai") return Domain::AI;
    if (f == "dl") return Domain::DL;
    if (f == "ir") return Domain::IR;
    return Domain::Other;
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::LectureBank: return "lecturebank";
        case Provenance::TutorialBank: return "tutorialbank";
        case Provenance::Combined: return "combined";
        case Provenance::Synthetic: return "synthetic";
    }
    return "synthetic";
}

Provenance parse_provenance(std::string_view s) {
    const std::string f = casefold(trim(s));
    if (f == "lecturebank") return Provenance::LectureBank;
    if (f == "tutorialbank") return Provenance::TutorialBank;
    if (f == "combined") return Provenance::Combined;
    if (f == "synthetic") return Provenance::Synthetic;
    throw Error("unknown corpus provenance '" + std::string(s) + "'");
}

DocumentSet::DocumentSet(std::vector<Document> documents, Provenance provenance)
    : documents_(std::move(documents)), provenance_(provenance) {
    std::unordered_set<std::string> seen;
    for (const auto& d : documents_) {
        if (!seen.insert(d.id).second) throw Error("duplicate document id '" + d.id + "'");
    }
}

DocumentSet DocumentSet::combine(const DocumentSet& a, const DocumentSet& b) {
    std::vector<Document> docs = a.documents();
    std::unordered_set<std::string> ids;
    for (const auto& d : docs) ids.insert(d.id);
    for (Document d : b.documents()) {
        if (ids.count(d.id)) d.id = std::string(to_string(b.provenance())) + ":" + d.id;
        ids.insert(d.id);
        docs.push_back(std::move(d));
    }
    return DocumentSet(std::move(docs), Provenance::Combined);
}

namespace {

bool is_token_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizeConfig& cfg) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) continue;
        std::string tok = casefold(text.substr(start, i - start));
        if (tok.size() < cfg.min_length) continue;
        if (cfg.drop_numbers && all_digits(tok)) continue;
        out.push_back(std::move(tok));
    }
    return out;
}

std::vector<std::string> split_slides(std::string_view text) {
    std::vector<std::string> slides;
    std::string current;
    auto flush = [&] {
        while (!current.empty() && (current.back() == '\n' || current.back() == ' ' || current.back() == '\t')) {
            current.pop_back();
        }
        if (!trim(current).empty()) slides.push_back(current);
        current.clear();
    };
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line == "---") {
            flush();
        } else {
            std::size_t start = 0;
            for (std::size_t ff = line.find('\f'); ff != std::string_view::npos; ff = line.find('\f', start)) {
                current.append(line.substr(start, ff - start));
                flush();
                start = ff + 1;
            }
            current.append(line.substr(start));
            current.push_back('\n');
        }
        pos = eol + 1;
    }
    flush();
    return slides;
}

namespace {

std::optional<std::string> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) return std::nullopt;
    return ss.str();
}

Document make_document(std::string id, const fs::path& path, std::string text, const TokenizeConfig& cfg) {
    Document d;
    d.id = std::move(id);
    d.source_path = path.string();
    d.slide_texts = split_slides(text);
    for (const auto& s : d.slide_texts) {
        auto toks = tokenize(s, cfg);
        d.tokens.insert(d.tokens.end(), std::make_move_iterator(toks.begin()), std::make_move_iterator(toks.end()));
    }
    return d;
}

DocumentSet ingest_directory(const fs::path& root, Provenance provenance, const TokenizeConfig& cfg) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<Document> docs;
    std::vector<std::string> skipped;
    for (const auto& file : files) {
        auto text = read_file(file);
        if (!text) {
            std::cerr << "warning: cannot read " << file << ", skipping\n";
            skipped.push_back(file.string());
            continue;
        }
        const fs::path rel = fs::relative(file, root);
        std::vector<std::string> parts;
        for (const auto& part : rel) parts.push_back(part.string());
        std::string id = (rel.parent_path() / rel.stem()).generic_string();
        Document d = make_document(std::move(id), file, std::move(*text), cfg);
        if (parts.size() >= 2) d.domain = parse_domain(parts[0]);
        if (parts.size() >= 3) d.course = parts[1];
        docs.push_back(std::move(d));
    }
    DocumentSet set(std::move(docs), provenance);
    set.set_skipped(std::move(skipped));
    return set;
}

DocumentSet ingest_manifest(const fs::path& manifest, Provenance provenance, const TokenizeConfig& cfg) {
    std::ifstream in(manifest);
    if (!in) throw Error("cannot open manifest " + manifest.string());
    const fs::path base = manifest.parent_path();
    std::vector<Document> docs;
    std::vector<std::string> skipped;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        Json entry;
        try {
            entry = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw Error(manifest.string() + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        if (!entry.contains("path")) {
            throw Error(manifest.string() + ":" + std::to_string(line_no) + ": missing 'path'");
        }
        fs::path path = entry.at("path").get<std::string>();
        if (path.is_relative()) path = base / path;
        auto text = read_file(path);
        if (!text) {
            std::cerr << "warning: cannot read " << path << ", skipping\n";
            skipped.push_back(path.string());
            continue;
        }
        std::string id = entry.value("id", path.stem().string());
        Document d = make_document(std::move(id), path, std::move(*text), cfg);
        d.domain = parse_domain(entry.value("domain", std::string("other")));
        d.course = entry.value("course", std::string());
        if (entry.contains("taxonomy_label") && entry["taxonomy_label"].is_string()) {
            d.taxonomy_label = entry["taxonomy_label"].get<std::string>();
        }
        docs.push_back(std::move(d));
    }
    DocumentSet set(std::move(docs), provenance);
    set.set_skipped(std::move(skipped));
    return set;
}

}  // namespace

DocumentSet ingest_documents(const fs::path& source, Provenance provenance, const TokenizeConfig& cfg) {
    if (!fs::exists(source)) throw Error("corpus source does not exist: " + source.string());
    DocumentSet set = fs::is_directory(source) ? ingest_directory(source, provenance, cfg)
                                               : ingest_manifest(source, provenance, cfg);
    if (set.empty()) throw Error("corpus source contains no readable documents: " + source.string());
    return set;
}

void finalize_ratios(DomainStats& s) {
    s.tokens_per_lecture = s.lectures ? static_cast<double>(s.tokens) / static_cast<double>(s.lectures) : 0.0;
    s.tokens_per_slide = s.slides ? static_cast<double>(s.tokens) / static_cast<double>(s.slides) : 0.0;
}

CorpusStats corpus_stats(const DocumentSet& set) {
    if (set.empty()) throw Error("corpus_stats: empty document set");
    constexpr Domain order[] = {Domain::NLP, Domain::ML, Domain::AI, Domain::DL, Domain::IR, Domain::Other};
    std::map<Domain, DomainStats> by_domain;
    std::map<Domain, std::set<std::string>> courses;
    std::set<std::string> all_courses;
    for (const auto& d : set.documents()) {
        auto& s = by_domain[d.domain];
        s.domain = std::string(to_string(d.domain));
        s.lectures += 1;
        s.slides += d.slide_texts.size();
        s.tokens += d.tokens.size();
        if (!d.course.empty()) {
            courses[d.domain].insert(d.course);
            all_courses.insert(std::string(to_string(d.domain)) + "/" + d.course);
        }
    }
    CorpusStats out;
    out.overall.domain = "Overall";
    for (Domain dom : order) {
        auto it = by_domain.find(dom);
        if (it == by_domain.end()) continue;
        DomainStats s = it->second;
        s.courses = courses[dom].size();
        finalize_ratios(s);
        out.overall.lectures += s.lectures;
        out.overall.slides += s.slides;
        out.overall.tokens += s.tokens;
        out.domains.push_back(std::move(s));
    }
    out.overall.courses = all_courses.size();
    finalize_ratios(out.overall);
    return out;
}

std::string_view to_string(TermOrigin o) {
    switch (o) {
        case TermOrigin::Taxonomy: return "taxonomy";
        case TermOrigin::PrereqTopics: return "prereq_topics";
        case TermOrigin::Headers: return "headers";
    }
    return "headers";
}

bool Vocabulary::contains(std::string_view phrase) const {
    const std::string key = casefold(trim(phrase));
    return std::any_of(terms.begin(), terms.end(), [&](const VocabularyTerm& t) { return t.phrase == key; });
}

namespace {

std::string collapse_spaces(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            space = true;
            continue;
        }
        if (space && !out.empty()) out.push_back(' ');
        space = false;
        out.push_back(c);
    }
    return out;
}

std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        const bool sp = c == ' ';
        if (!sp && !in_word) ++n;
        in_word = !sp;
    }
    return n;
}

bool is_edge_punct(char c) {
    return c == '.' || c == ',' || c == ':' || c == ';' || c == '!' || c == '?' || c == '-' || c == '*' ||
           c == '#' || c == '|' || c == '>' || c == '"' || c == '\'' || c == '_' || c == '~';
}

}  // namespace

std::optional<std::string> normalize_header(std::string_view header, const HeaderFilter& filter) {
    static const std::regex bullet(R"(^(\xE2\x80\xA2|\xE2\x80\x93|\xE2\x96\xAA|[-*>o#])\s+)");
    static const std::regex numbered(R"(^\(?\d+(\.\d+)*[.):]?\s+)");
    static const std::regex lettered(R"(^\(?([a-z]|[ivxlc]+)[.)]\s+)");
    static const std::regex page_number(R"(\s+(p\.?\s*)?\d+(\s*/\s*\d+)?$)");

    std::string s = collapse_spaces(casefold(trim(header)));
    for (bool changed = true; changed;) {
        std::string before = s;
        s = std::regex_replace(s, bullet, "", std::regex_constants::format_first_only);
        s = std::regex_replace(s, numbered, "", std::regex_constants::format_first_only);
        s = std::regex_replace(s, lettered, "", std::regex_constants::format_first_only);
        s = std::regex_replace(s, page_number, "");
        std::string_view v = trim(s);
        while (!v.empty() && is_edge_punct(v.front())) v.remove_prefix(1);
        while (!v.empty() && is_edge_punct(v.back())) v.remove_suffix(1);
        s = std::string(trim(v));
        changed = s != before;
    }
    const bool has_letter = std::any_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || static_cast<unsigned char>(c) >= 0x80;
    });
    if (!has_letter) return std::nullopt;
    if (word_count(s) > filter.max_words) return std::nullopt;
    return s;
}

Vocabulary extract_vocabulary(const DocumentSet& set, const std::vector<std::string>& taxonomy,
                              const std::vector<std::string>& prereq_topics, const HeaderFilter& filter) {
    Vocabulary vocab;
    std::unordered_set<std::string> seen;
    auto add = [&](std::string phrase, TermOrigin origin) {
        if (phrase.empty()) return;
        if (seen.insert(phrase).second) vocab.terms.push_back({std::move(phrase), origin});
    };
    for (const auto& p : taxonomy) add(collapse_spaces(casefold(trim(p))), TermOrigin::Taxonomy);
    for (const auto& p : prereq_topics) add(collapse_spaces(casefold(trim(p))), TermOrigin::PrereqTopics);
    for (const auto& doc : set.documents()) {
        for (const auto& slide : doc.slide_texts) {
            std::istringstream lines(slide);
            std::string line;
            while (std::getline(lines, line)) {
                if (trim(line).empty()) continue;
                if (auto h = normalize_header(line, filter)) add(std::move(*h), TermOrigin::Headers);
                break;
            }
        }
    }
    return vocab;
}

std::vector<std::string> read_phrase_list(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open phrase list " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

}  // namespace prereq
