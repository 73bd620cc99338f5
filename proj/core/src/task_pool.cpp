#include "toolfault/task_pool.hpp"

#include <array>
#include <cstdio>

#include "toolfault/hashing.hpp"

namespace toolfault {

namespace {

struct Field {
  const char* name;
  std::int64_t lo;   // numeric range when `choices` is empty
  std::int64_t hi;
  std::vector<const char*> choices;
};

struct Family {
  const char* tool;
  const char* alternative;  // nullptr when the capability has one provider
  const char* capability;
  const char* description;
  const char* param;
  const char* request;  // prompt phrase, {} is replaced by the argument
  std::vector<const char*> values;
  std::vector<Field> fields;
};

const std::vector<Family>& families() {
  static const std::vector<Family> f = {
      {"get_weather", "weather_lookup_v2", "weather", "Current weather for a city", "city",
       "check the current weather in {}",
       {"Paris", "Lagos", "Osaka", "Lima", "Oslo"},
       {{"temperature_c", -5, 35, {}}, {"conditions", 0, 0, {"sunny", "cloudy", "rain", "fog"}},
        {"humidity_pct", 20, 95, {}}}},
      {"get_stock_quote", "market_data_quote", "stock_quote", "Latest quote for a ticker", "symbol",
       "get the latest quote for {}",
       {"ACME", "GLOBX", "INITECH", "UMBRL", "WAYNE"},
       {{"price_usd", 10, 900, {}}, {"change_pct", -5, 5, {}}, {"volume", 1000, 90000, {}}}},
      {"search_flights", nullptr, "flights", "Cheapest flight on a route", "route",
       "find the cheapest flight for {}",
       {"PAR-NYC", "LOS-LHR", "KIX-SFO", "LIM-MAD", "OSL-BER"},
       {{"fare_usd", 90, 1400, {}}, {"airline", 0, 0, {"Aerolink", "SkyBridge", "Nordflyg"}},
        {"departure", 0, 0, {"06:40", "11:15", "17:05", "22:30"}}}},
      {"convert_currency", nullptr, "fx", "Exchange rate for a currency pair", "pair",
       "look up the exchange rate for {}",
       {"EUR-USD", "USD-JPY", "GBP-NGN", "PEN-EUR", "NOK-SEK"},
       {{"rate_milli", 500, 160000, {}}, {"as_of", 0, 0, {"2026-03-01", "2026-03-02", "2026-03-03"}}}},
      {"lookup_user_profile", "social_user_info", "user_profile", "Public profile for a username",
       "username", "fetch the profile of {}",
       {"nike", "natgeo", "nasa", "fcbarcelona", "lego"},
       {{"followers", 10000, 900000, {}}, {"posts", 50, 9000, {}}, {"verified", 0, 0, {"yes", "no"}}}},
      {"get_recent_media", nullptr, "media", "Recent posts for a username", "username",
       "list the recent posts of {}",
       {"nike", "natgeo", "nasa", "fcbarcelona", "lego"},
       {{"media_count", 1, 40, {}}, {"top_caption", 0, 0, {"Just Do It", "Into the wild", "Liftoff"}},
        {"likes", 100, 50000, {}}}},
      {"geocode_address", "maps_geocoder", "geocode", "Coordinates for an address", "address",
       "geocode {}",
       {"10 Downing St", "1 Infinite Loop", "Champ de Mars", "Shibuya Crossing", "Plaza Mayor"},
       {{"lat_micro", -60000000, 60000000, {}}, {"lon_micro", -170000000, 170000000, {}},
        {"country", 0, 0, {"GB", "US", "FR", "JP", "ES"}}}},
      {"translate_text", nullptr, "translate", "Translate a phrase to Spanish", "phrase",
       "translate \"{}\" to Spanish",
       {"good morning", "thank you", "where is the station", "see you soon", "how much"},
       {{"translation", 0, 0, {"buenos dias", "gracias", "donde esta la estacion", "hasta pronto"}},
        {"confidence_pct", 60, 99, {}}}},
      {"get_exchange_holidays", nullptr, "market_calendar", "Next holiday for an exchange", "market",
       "check the next holiday of the {} exchange",
       {"NYSE", "LSE", "TSE", "BVL", "OSE"},
       {{"next_holiday", 0, 0, {"2026-04-03", "2026-05-25", "2026-07-03"}}, {"days_until", 1, 120, {}}}},
      {"fetch_news_headlines", "news_search_alt", "news", "Top headlines for a topic", "topic",
       "fetch the top headlines about {}",
       {"climate", "elections", "football", "semiconductors", "space"},
       {{"top_headline", 0, 0, {"Talks resume", "Record set", "Launch delayed", "Deal signed"}},
        {"source", 0, 0, {"Wire A", "Daily B", "Courier C"}}, {"articles", 3, 60, {}}}},
      {"get_movie_details", nullptr, "movies", "Details for a movie title", "title",
       "look up the movie {}",
       {"Alien", "Amelie", "Rashomon", "Roma", "Heat"},
       {{"year", 1950, 2024, {}}, {"rating_tenths", 55, 92, {}},
        {"director", 0, 0, {"R. Scott", "J. Jeunet", "A. Kurosawa", "A. Cuaron", "M. Mann"}}}},
      {"check_inventory", nullptr, "inventory", "Stock level for a SKU", "sku", "check stock for SKU {}",
       {"SKU-1001", "SKU-2044", "SKU-3090", "SKU-4172", "SKU-5215"},
       {{"in_stock", 0, 500, {}}, {"warehouse", 0, 0, {"north", "south", "east", "west"}}}},
      {"get_package_status", "courier_tracking", "tracking", "Delivery status for a tracking id",
       "tracking_id", "track package {}",
       {"TRK-88A", "TRK-19C", "TRK-47F", "TRK-63K", "TRK-02Z"},
       {{"status", 0, 0, {"in transit", "delivered", "held at customs", "out for delivery"}},
        {"eta_days", 0, 9, {}}}},
      {"get_air_quality", nullptr, "air_quality", "Air quality index for a city", "city",
       "check the air quality in {}",
       {"Paris", "Lagos", "Osaka", "Lima", "Oslo"},
       {{"aqi", 5, 180, {}}, {"dominant_pollutant", 0, 0, {"pm25", "pm10", "o3", "no2"}}}},
      {"lookup_recipe", nullptr, "recipes", "Recipe summary for a dish", "dish", "find a recipe for {}",
       {"ramen", "paella", "jollof rice", "ceviche", "lefse"},
       {{"calories", 200, 1200, {}}, {"prep_minutes", 10, 120, {}},
        {"cuisine", 0, 0, {"japanese", "spanish", "nigerian", "peruvian", "norwegian"}}}},
      {"get_calendar_events", nullptr, "calendar", "Events on a date", "date",
       "list my calendar events on {}",
       {"2026-03-09", "2026-03-10", "2026-03-11", "2026-03-12", "2026-03-13"},
       {{"event_count", 0, 8, {}}, {"first_event", 0, 0, {"standup", "design review", "1:1", "offsite"}}}},
  };
  return f;
}

nlohmann::json field_value(const Family& fam, const Field& field, const std::string& arg) {
  const std::uint64_t h = fnv1a64(std::string(fam.capability) + "|" + arg + "|" + field.name);
  if (!field.choices.empty()) return field.choices[h % field.choices.size()];
  const auto span = static_cast<std::uint64_t>(field.hi - field.lo + 1);
  return field.lo + static_cast<std::int64_t>(h % span);
}

std::string response_for(const Family& fam, const std::string& arg) {
  nlohmann::json body = nlohmann::json::object();
  body[fam.param] = arg;
  for (const auto& field : fam.fields) body[field.name] = field_value(fam, field, arg);
  return body.dump();
}

ToolSpec tool_for(const Family& fam, const char* name, const std::string& arg) {
  ToolSpec t;
  t.name = name;
  t.description = fam.description;
  t.capability = fam.capability;
  t.parameters = {{fam.param, ParamType::String, true}};
  t.scripted_responses[canonical_call_key(name, {{fam.param, arg}})] = response_for(fam, arg);
  return t;
}

std::string phrase(const Family& fam, const std::string& arg) {
  std::string out = fam.request;
  out.replace(out.find("{}"), 2, arg);
  return out;
}

Task make_task(int index) {
  const auto& fams = families();
  const int n = static_cast<int>(fams.size());
  std::vector<int> chosen = {index % n};
  int b = (index * 5 + 3) % n;
  if (b == chosen[0]) b = (b + 1) % n;
  chosen.push_back(b);
  if (index % 3 == 0) {
    int c = (index * 7 + 11) % n;
    while (c == chosen[0] || c == chosen[1]) c = (c + 1) % n;
    chosen.push_back(c);
  }

  Task task;
  char id[16];
  std::snprintf(id, sizeof id, "task-%02d", index + 1);
  task.id = id;
  std::vector<ToolSpec> tools;
  std::string prompt;
  for (std::size_t s = 0; s < chosen.size(); ++s) {
    const Family& fam = fams[static_cast<std::size_t>(chosen[s])];
    const std::string arg = fam.values[static_cast<std::size_t>(index + static_cast<int>(s)) % fam.values.size()];
    tools.push_back(tool_for(fam, fam.tool, arg));
    if (fam.alternative != nullptr) tools.push_back(tool_for(fam, fam.alternative, arg));

    TaskStep step;
    step.tool = fam.tool;
    step.arguments = {{fam.param, arg}};
    for (const auto& f : fam.fields) step.expected_fields.push_back(f.name);
    task.plan.steps.push_back(std::move(step));

    prompt += s == 0 ? "Please " : (s + 1 == chosen.size() ? ", and finally " : ", then ");
    prompt += phrase(fam, arg);
  }
  prompt += ". Report what you found.";
  task.prompt = std::move(prompt);
  task.tools = ToolRegistry(std::move(tools));
  return task;
}

}  // namespace

std::uint64_t task_hash(const Task& task) {
  return fnv1a64(task.prompt + "\n" + task.tools.to_json().dump());
}

void to_json(nlohmann::json& j, const Task& t) {
  j = {{"id", t.id}, {"prompt", t.prompt}, {"tools", t.tools.to_json()}, {"plan", t.plan}};
}

void from_json(const nlohmann::json& j, Task& t) {
  t.id = j.at("id").get<std::string>();
  t.prompt = j.at("prompt").get<std::string>();
  t.tools = ToolRegistry::from_json(j.at("tools"));
  t.plan = j.at("plan").get<TaskPlan>();
}

const std::vector<Task>& builtin_task_pool() {
  static const std::vector<Task> pool = [] {
    std::vector<Task> out;
    for (int i = 0; i < 40; ++i) out.push_back(make_task(i));
    return out;
  }();
  return pool;
}

}  // namespace toolfault
