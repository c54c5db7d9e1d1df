#include "branching/model_json.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "branching/error.hpp"

namespace branching {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::Parse, path + ": " + message);
}

double parse_decimal(const std::string& text, const std::string& path) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) parse_fail(path, "not a number: \"" + text + "\"");
  return value;
}

std::uint32_t parse_count(const std::string& text, const std::string& path) {
  std::uint32_t value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    parse_fail(path, "not a nonnegative integer: \"" + text + "\"");
  }
  return value;
}

std::vector<std::uint32_t> parse_counts(const std::string& key, std::size_t types,
                                        const std::string& path) {
  std::vector<std::uint32_t> counts;
  std::size_t start = 0;
  while (true) {
    const auto comma = key.find(',', start);
    counts.push_back(parse_count(key.substr(start, comma - start), path));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (counts.size() != types) {
    parse_fail(path, "count vector has " + std::to_string(counts.size()) +
                         " entries, expected " + std::to_string(types));
  }
  return counts;
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) parse_fail(path, std::string("missing \"") + key + "\"");
  return obj.at(key);
}

void require_object(const json& v, const std::string& path) {
  if (!v.is_object()) parse_fail(path, "expected an object");
}

SizePmf parse_size_pmf(const json& v, const std::string& path) {
  require_object(v, path);
  SizePmf pmf;
  for (const auto& [key, p] : v.items()) {
    const std::string at = path + "/" + key;
    pmf.emplace_back(parse_count(key, at), parse_real(p, at));
  }
  return pmf;
}

json size_pmf_to_json(const SizePmf& pmf) {
  json out = json::object();
  for (const auto& [k, p] : pmf) out[std::to_string(k)] = p;
  return out;
}

OffspringLaw parse_offspring(const json& v, std::size_t types, const std::string& path) {
  require_object(v, path);
  if (v.contains("geometric")) {
    GeometricLaw geo;
    geo.success = parse_real(v.at("geometric"), path + "/geometric");
    if (v.contains("child_type")) {
      if (!v.at("child_type").is_number_unsigned()) {
        parse_fail(path + "/child_type", "expected a type index");
      }
      geo.child_type = v.at("child_type").get<TypeId>();
    }
    return geo;
  }
  CountPmf pmf;
  for (const auto& [key, p] : v.items()) {
    const std::string at = path + "/" + key;
    pmf.outcomes.push_back({parse_counts(key, types, at), parse_real(p, at)});
  }
  return pmf;
}

AgeLaw parse_ages(const json& v, const std::string& path) {
  require_object(v, path);
  if (v.contains("uniform")) {
    const auto& u = v.at("uniform");
    if (!u.is_array() || u.size() != 2) parse_fail(path + "/uniform", "expected [lo, hi]");
    return AgeUniform{parse_real(u[0], path + "/uniform/0"),
                      parse_real(u[1], path + "/uniform/1")};
  }
  if (v.contains("exponential")) {
    return AgeExponential{parse_real(v.at("exponential"), path + "/exponential")};
  }
  const auto& atoms = require(v, "atoms", path);
  require_object(atoms, path + "/atoms");
  AgeAtoms out;
  for (const auto& [key, p] : atoms.items()) {
    const std::string at = path + "/atoms/" + key;
    out.atoms.emplace_back(parse_decimal(key, at), parse_real(p, at));
  }
  return out;
}

}  // namespace

std::string format_real(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

double parse_real(const json& value, const std::string& path) {
  if (value.is_number()) return value.get<double>();
  if (!value.is_string()) parse_fail(path, "expected a number");
  const auto text = value.get<std::string>();
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_decimal(text, path);
  const double num = parse_decimal(text.substr(0, slash), path);
  const double den = parse_decimal(text.substr(slash + 1), path);
  if (den == 0.0) parse_fail(path, "zero denominator");
  return num / den;
}

ModelSpec parse_model_spec(const json& doc) {
  require_object(doc, "");
  ModelSpec spec;
  const auto& types = require(doc, "types", "");
  if (!types.is_number_unsigned()) parse_fail("/types", "expected a positive integer");
  spec.types = types.get<std::size_t>();
  if (doc.contains("career_cap")) {
    if (!doc.at("career_cap").is_number_unsigned()) {
      parse_fail("/career_cap", "expected a positive integer");
    }
    spec.career_cap = doc.at("career_cap").get<std::size_t>();
  }
  const auto& variant = require(doc, "variant", "");
  if (!variant.is_string()) parse_fail("/variant", "expected a string");
  const auto name = variant.get<std::string>();

  if (name == "bgw") {
    const auto& offspring = require(doc, "offspring", "");
    if (!offspring.is_array()) parse_fail("/offspring", "expected an array");
    BgwSpec bgw;
    for (std::size_t s = 0; s < offspring.size(); ++s) {
      bgw.offspring.push_back(
          parse_offspring(offspring[s], spec.types, "/offspring/" + std::to_string(s)));
    }
    spec.law = std::move(bgw);
  } else if (name == "sevastyanov") {
    const auto& life = require(doc, "life_span", "");
    const auto& split = require(doc, "split", "");
    require_object(life, "/life_span");
    require_object(split, "/split");
    SevastyanovSpec sev;
    if (life.contains("exponential")) {
      sev.life = ExponentialLife{parse_real(life.at("exponential"), "/life_span/exponential"),
                                 parse_size_pmf(split, "/split")};
    } else {
      DiscreteLife discrete;
      for (const auto& [key, p] : life.items()) {
        const std::string at = "/life_span/" + key;
        LifeAtom atom;
        atom.age = parse_decimal(key, at);
        atom.prob = parse_real(p, at);
        bool found = false;
        for (const auto& [skey, pmf] : split.items()) {
          if (parse_decimal(skey, "/split/" + skey) == atom.age) {
            atom.split = parse_size_pmf(pmf, "/split/" + skey);
            found = true;
            break;
          }
        }
        if (!found) parse_fail("/split/" + key, "no splitting law for this life span");
        discrete.atoms.push_back(std::move(atom));
      }
      sev.life = std::move(discrete);
    }
    spec.law = std::move(sev);
  } else if (name == "general") {
    const auto& careers = require(doc, "careers", "");
    if (!careers.is_array()) parse_fail("/careers", "expected an array");
    GeneralSpec gen;
    for (std::size_t s = 0; s < careers.size(); ++s) {
      const std::string path = "/careers/" + std::to_string(s);
      const auto& c = careers[s];
      require_object(c, path);
      GeneralType t;
      t.litter = parse_size_pmf(require(c, "litter", path), path + "/litter");
      t.ages = parse_ages(require(c, "ages", path), path + "/ages");
      if (c.contains("child_types")) {
        const auto& ct = c.at("child_types");
        if (!ct.is_array()) parse_fail(path + "/child_types", "expected an array");
        for (std::size_t j = 0; j < ct.size(); ++j) {
          t.child_types.push_back(
              parse_real(ct[j], path + "/child_types/" + std::to_string(j)));
        }
      } else if (spec.types == 1) {
        t.child_types = {1.0};
      } else {
        parse_fail(path, "missing \"child_types\"");
      }
      gen.types.push_back(std::move(t));
    }
    spec.law = std::move(gen);
  } else {
    parse_fail("/variant", "unknown variant \"" + name + "\"");
  }
  return spec;
}

json model_spec_to_json(const ModelSpec& spec) {
  json doc;
  doc["types"] = spec.types;
  doc["variant"] = to_string(spec.variant());
  doc["career_cap"] = spec.career_cap;
  if (const auto* bgw = std::get_if<BgwSpec>(&spec.law)) {
    json offspring = json::array();
    for (const auto& law : bgw->offspring) {
      if (const auto* geo = std::get_if<GeometricLaw>(&law)) {
        offspring.push_back({{"geometric", geo->success}, {"child_type", geo->child_type}});
        continue;
      }
      json pmf = json::object();
      for (const auto& o : std::get<CountPmf>(law).outcomes) {
        std::string key;
        for (std::size_t i = 0; i < o.counts.size(); ++i) {
          if (i != 0) key += ',';
          key += std::to_string(o.counts[i]);
        }
        pmf[key] = o.prob;
      }
      offspring.push_back(std::move(pmf));
    }
    doc["offspring"] = std::move(offspring);
  } else if (const auto* sev = std::get_if<SevastyanovSpec>(&spec.law)) {
    if (const auto* e = std::get_if<ExponentialLife>(&sev->life)) {
      doc["life_span"] = {{"exponential", e->rate}};
      doc["split"] = size_pmf_to_json(e->split);
    } else {
      json life = json::object();
      json split = json::object();
      for (const auto& atom : std::get<DiscreteLife>(sev->life).atoms) {
        life[format_real(atom.age)] = atom.prob;
        split[format_real(atom.age)] = size_pmf_to_json(atom.split);
      }
      doc["life_span"] = std::move(life);
      doc["split"] = std::move(split);
    }
  } else {
    json careers = json::array();
    for (const auto& t : std::get<GeneralSpec>(spec.law).types) {
      json c;
      c["litter"] = size_pmf_to_json(t.litter);
      if (const auto* a = std::get_if<AgeAtoms>(&t.ages)) {
        json atoms = json::object();
        for (const auto& [age, p] : a->atoms) atoms[format_real(age)] = p;
        c["ages"] = {{"atoms", atoms}};
      } else if (const auto* u = std::get_if<AgeUniform>(&t.ages)) {
        c["ages"] = {{"uniform", {u->lo, u->hi}}};
      } else {
        c["ages"] = {{"exponential", std::get<AgeExponential>(t.ages).rate}};
      }
      c["child_types"] = t.child_types;
      careers.push_back(std::move(c));
    }
    doc["careers"] = std::move(careers);
  }
  return doc;
}

Model load_model_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("malformed JSON: ") + e.what());
  }
  return Model(parse_model_spec(doc));
}

Model load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return load_model_text(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

}  // namespace branching
