#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "litfield/date.hpp"
#include "litfield/error.hpp"

namespace litfield {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct PublicationRecord {
    std::string id;
    Date publication_date;
    std::string field_label;
    std::string abstract_text;
    long citation_count = 0;
    long reference_count = 0;
    Date retrieved_at;

    friend bool operator==(const PublicationRecord&, const PublicationRecord&) = default;
};

enum class Rejection { MissingAbstract, MissingDate, WrongField };

inline const char* to_string(Rejection r) {
    switch (r) {
        case Rejection::MissingAbstract: return "MissingAbstract";
        case Rejection::MissingDate: return "MissingDate";
        case Rejection::WrongField: return "WrongField";
    }
    return "?";
}

using ValidationResult = std::variant<PublicationRecord, Rejection>;

// Parses provider payload text; syntax errors carry the byte offset.
inline json parse_payload(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed payload: ") + e.what(), e.byte);
    }
}

namespace detail {

inline bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

inline long count_field(const json& raw, const char* key) {
    auto it = raw.find(key);
    if (it == raw.end() || it->is_null()) return 0;
    if (!it->is_number_integer()) throw ParseError(std::string("'") + key + "' is not an integer", 0);
    const long v = it->get<long>();
    if (v < 0) throw ParseError(std::string("'") + key + "' is negative", 0);
    return v;
}

}  // namespace detail

// Applies the three admission criteria (abstract, date, target field) to one
// provider payload. `target_fields` is tried in order; the first one present in
// the payload's field list becomes the record's field label.
//
// Payload schema (Semantic Scholar graph API subset, see schemas/payload.schema.json):
//   paperId: string, abstract: string|null, publicationDate: "YYYY-MM-DD"|null,
//   year: int|null, fieldsOfStudy: [string]|null, citationCount: int, referenceCount: int
inline ValidationResult validate_record(const json& raw, std::span<const std::string> target_fields,
                                        Date retrieved_at) {
    if (!raw.is_object()) throw ParseError("payload is not a JSON object", 0);
    auto pid = raw.find("paperId");
    if (pid == raw.end() || !pid->is_string() || pid->get_ref<const std::string&>().empty())
        throw ParseError("payload lacks a paperId string", 0);

    PublicationRecord rec;
    rec.id = pid->get<std::string>();
    rec.retrieved_at = retrieved_at;
    rec.citation_count = detail::count_field(raw, "citationCount");
    rec.reference_count = detail::count_field(raw, "referenceCount");

    auto abs = raw.find("abstract");
    if (abs == raw.end() || !abs->is_string() || detail::is_blank(abs->get_ref<const std::string&>()))
        return Rejection::MissingAbstract;
    rec.abstract_text = abs->get<std::string>();

    auto pd = raw.find("publicationDate");
    if (pd != raw.end() && pd->is_string()) {
        auto d = Date::try_parse(pd->get_ref<const std::string&>());
        if (!d) throw ParseError("bad publicationDate '" + pd->get<std::string>() + "'", 0);
        rec.publication_date = *d;
    } else if (auto yr = raw.find("year"); yr != raw.end() && yr->is_number_integer()) {
        rec.publication_date = Date::mid_year(yr->get<int>());
    } else {
        return Rejection::MissingDate;
    }

    auto fos = raw.find("fieldsOfStudy");
    if (fos == raw.end() || !fos->is_array()) return Rejection::WrongField;
    for (const auto& target : target_fields) {
        for (const auto& f : *fos) {
            if (f.is_string() && f.get_ref<const std::string&>() == target) {
                rec.field_label = target;
                return rec;
            }
        }
    }
    return Rejection::WrongField;
}

inline ValidationResult validate_record(const json& raw, const std::string& target_field, Date retrieved_at) {
    return validate_record(raw, std::span<const std::string>(&target_field, 1), retrieved_at);
}

// Where a store's records came from.
struct Provenance {
    std::string provider_id;
    json parameters = json::object();  // query, center id, page size, ...
};

// Append-only keyed collection of validated records. Iteration order is by id.
class CorpusStore {
public:
    CorpusStore() = default;
    explicit CorpusStore(Provenance p) : provenance_(std::move(p)) {}

    void add(PublicationRecord rec) {
        if (rec.id.empty()) throw FormatError("record with empty id");
        if (rec.abstract_text.empty()) throw FormatError("record '" + rec.id + "' has an empty abstract");
        if (rec.field_label.empty()) throw FormatError("record '" + rec.id + "' has no field");
        if (rec.citation_count < 0 || rec.reference_count < 0)
            throw FormatError("record '" + rec.id + "' has a negative count");
        if (records_.count(rec.id)) throw DuplicateId(rec.id);
        std::string key = rec.id;
        records_.emplace(std::move(key), std::move(rec));
    }

    bool contains(const std::string& id) const { return records_.count(id) != 0; }
    const PublicationRecord& at(const std::string& id) const {
        auto it = records_.find(id);
        if (it == records_.end()) throw NotFound("no record '" + id + "'");
        return it->second;
    }
    const PublicationRecord* find(const std::string& id) const {
        auto it = records_.find(id);
        return it == records_.end() ? nullptr : &it->second;
    }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    auto begin() const { return records_.begin(); }
    auto end() const { return records_.end(); }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        out.reserve(records_.size());
        for (const auto& [id, _] : records_) out.push_back(id);
        return out;
    }

    const Provenance& provenance() const { return provenance_; }
    Provenance& provenance() { return provenance_; }

private:
    std::map<std::string, PublicationRecord> records_;
    Provenance provenance_;
};

// Ids with start <= publication_date <= end.
inline std::set<std::string> filter_window(const CorpusStore& store, Date start, Date end) {
    if (end < start) throw ConfigError("window start " + start.iso() + " is after end " + end.iso());
    std::set<std::string> out;
    for (const auto& [id, rec] : store)
        if (start <= rec.publication_date && rec.publication_date <= end) out.insert(id);
    return out;
}

inline ordered_json to_json(const PublicationRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["publication_date"] = r.publication_date.iso();
    j["field_label"] = r.field_label;
    j["abstract_text"] = r.abstract_text;
    j["citation_count"] = r.citation_count;
    j["reference_count"] = r.reference_count;
    j["retrieved_at"] = r.retrieved_at.iso();
    return j;
}

inline PublicationRecord record_from_json(const json& j) {
    try {
        PublicationRecord r;
        r.id = j.at("id").get<std::string>();
        r.publication_date = Date::parse(j.at("publication_date").get<std::string>());
        r.field_label = j.at("field_label").get<std::string>();
        r.abstract_text = j.at("abstract_text").get<std::string>();
        r.citation_count = j.at("citation_count").get<long>();
        r.reference_count = j.at("reference_count").get<long>();
        r.retrieved_at = Date::parse(j.at("retrieved_at").get<std::string>());
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad corpus record: ") + e.what());
    }
}

// One record per line, sorted by id.
inline void write_jsonl(const CorpusStore& store, std::ostream& out) {
    for (const auto& [_, rec] : store) out << to_json(rec).dump() << '\n';
}

inline void write_jsonl(const CorpusStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_jsonl(store, out);
}

inline CorpusStore read_jsonl(std::istream& in, Provenance provenance = {}) {
    CorpusStore store(std::move(provenance));
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("corpus line: ") + e.what(), line_start + e.byte);
        }
        store.add(record_from_json(j));
    }
    return store;
}

inline CorpusStore read_jsonl(const std::filesystem::path& path, Provenance provenance = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("cannot open corpus file " + path.string());
    return read_jsonl(in, std::move(provenance));
}

// Survival statistics of an ingestion run.
struct RejectionTally {
    std::size_t accepted = 0;
    std::size_t malformed = 0;
    std::size_t duplicate = 0;
    std::map<std::string, std::size_t> rejected;  // reason -> count

    std::size_t total() const {
        std::size_t n = accepted + malformed + duplicate;
        for (const auto& [_, c] : rejected) n += c;
        return n;
    }
    double survival_rate() const { return total() ? static_cast<double>(accepted) / total() : 0.0; }

    json to_json() const {
        json j;
        j["accepted"] = accepted;
        j["malformed"] = malformed;
        j["duplicate"] = duplicate;
        j["rejected"] = rejected;
        j["total"] = total();
        j["survival_rate"] = survival_rate();
        return j;
    }
};

}  // namespace litfield
