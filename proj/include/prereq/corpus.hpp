#pragma once

#include "prereq/common.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace prereq {

enum class Domain { NLP, ML, AI, DL, IR, Other };

std::string_view to_string(Domain d);
/// Case-insensitive; anything unrecognised maps to Domain::Other.
Domain parse_domain(std::string_view s);

enum class Provenance { LectureBank, TutorialBank, Combined, Synthetic };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

struct TokenizeConfig {
    std::size_t min_length = 1;
    bool drop_numbers = true;
};

struct Document {
    std::string id;
    std::string source_path;
    Domain domain = Domain::Other;
    std::string course;
    std::optional<std::string> taxonomy_label;
    std::vector<std::string> slide_texts;
    std::vector<std::string> tokens;
};

/// Immutable after construction; documents keep their ingestion order.
class DocumentSet {
public:
    DocumentSet() = default;
    /// Throws if two documents share an id.
    DocumentSet(std::vector<Document> documents, Provenance provenance);

    const std::vector<Document>& documents() const { return documents_; }
    Provenance provenance() const { return provenance_; }
    std::size_t size() const { return documents_.size(); }
    bool empty() const { return documents_.empty(); }

    /// Paths that could not be read during ingestion.
    const std::vector<std::string>& skipped() const { return skipped_; }
    void set_skipped(std::vector<std::string> s) { skipped_ = std::move(s); }

    /// Concatenates two sets; ids from `b` that collide with `a` are prefixed.
    static DocumentSet combine(const DocumentSet& a, const DocumentSet& b);

private:
    std::vector<Document> documents_;
    Provenance provenance_ = Provenance::Synthetic;
    std::vector<std::string> skipped_;
};

/// Lowercases, splits on anything that is not an ASCII letter/digit (UTF-8
/// continuation bytes count as letters), drops pure-number tokens.
std::vector<std::string> tokenize(std::string_view text, const TokenizeConfig& cfg = {});

/// Splits a lecture file into slides on form-feed characters or lines that are exactly `---`.
std::vector<std::string> split_slides(std::string_view text);

/// `source` is either a directory (DOMAIN/[course/]lecture.txt layout) or a
/// JSON-lines manifest with {id, path, domain, course, taxonomy_label?}.
/// Unreadable files are skipped and listed in DocumentSet::skipped().
DocumentSet ingest_documents(const std::filesystem::path& source, Provenance provenance,
                             const TokenizeConfig& cfg = {});

struct DomainStats {
    std::string domain;
    std::size_t courses = 0;
    std::size_t lectures = 0;
    std::size_t slides = 0;
    std::size_t tokens = 0;
    double tokens_per_lecture = 0.0;
    double tokens_per_slide = 0.0;
};

struct CorpusStats {
    std::vector<DomainStats> domains;  // only domains that occur, in Domain enum order
    DomainStats overall;
};

/// Fills the two ratio columns from the counts (0 when the denominator is 0).
void finalize_ratios(DomainStats& s);

CorpusStats corpus_stats(const DocumentSet& set);

enum class TermOrigin { Taxonomy, PrereqTopics, Headers };
std::string_view to_string(TermOrigin o);

struct VocabularyTerm {
    std::string phrase;
    TermOrigin origin;
};

struct Vocabulary {
    std::vector<VocabularyTerm> terms;
    bool contains(std::string_view phrase) const;
};

struct HeaderFilter {
    std::size_t max_words = 8;
};

/// Normalises one slide header: casefold, strip enumeration prefixes
/// ("3.", "2.1)", "(a)", "iv.", bullets), trailing page numbers and edge punctuation.
/// Returns nullopt when nothing usable remains or the header is too long.
std::optional<std::string> normalize_header(std::string_view header, const HeaderFilter& filter = {});

/// Union of taxonomy phrases, prerequisite topic phrases and filtered slide
/// headers, deduplicated after case folding. The first origin seen wins.
Vocabulary extract_vocabulary(const DocumentSet& set, const std::vector<std::string>& taxonomy,
                              const std::vector<std::string>& prereq_topics, const HeaderFilter& filter = {});

/// Reads one phrase per non-empty line.
std::vector<std::string> read_phrase_list(const std::filesystem::path& path);

}  // namespace prereq
