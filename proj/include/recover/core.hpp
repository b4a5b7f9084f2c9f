#pragma once
// Shared vocabulary atoms and error types used across the library.

#include <compare>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

namespace recover {

// One position of a triple: an entity instance, an ontology class, or a
// tagged literal (state labels, tick counts, action names, ...).
struct Term {
    enum class Kind : uint8_t { Entity, Class, Literal };

    Kind kind = Kind::Entity;
    std::string text;

    Term() = default;
    Term(Kind k, std::string t) : kind(k), text(std::move(t)) {}

    static Term entity(std::string t) { return {Kind::Entity, std::move(t)}; }
    static Term cls(std::string t) { return {Kind::Class, std::move(t)}; }
    static Term literal(std::string t) { return {Kind::Literal, std::move(t)}; }

    bool is_entity() const { return kind == Kind::Entity; }
    bool is_class() const { return kind == Kind::Class; }
    bool is_literal() const { return kind == Kind::Literal; }

    auto operator<=>(const Term&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const Term& t) { return os << t.text; }

struct Triple {
    Term subject;           // entity
    std::string predicate;  // declared predicate or relation name
    Term object;

    auto operator<=>(const Triple&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const Triple& t) {
    return os << t.subject.text << ' ' << t.predicate << ' ' << t.object.text;
}

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Schema/rule/task file problem, carries a 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(std::string file, size_t line, const std::string& msg)
        : Error(file + ":" + std::to_string(line) + ": " + msg), file_(std::move(file)), line_(line) {}
    const std::string& file() const { return file_; }
    size_t line() const { return line_; }

private:
    std::string file_;
    size_t line_;
};

class VocabularyError : public Error {
public:
    using Error::Error;
};

}  // namespace recover
