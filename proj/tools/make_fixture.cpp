#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "sewerml/error.hpp"
#include "sewerml/fixture.hpp"

int main(int argc, char** argv) {
  CLI::App app{"writes the 17-catchment synthetic dataset"};
  std::string dir;
  sewerml::fixture::FixtureOptions opts;
  app.add_option("dir", dir, "target directory")->required();
  app.add_option("--seed", opts.seed, "generator seed");
  app.add_option("--hours", opts.hours, "water-level series length in hours");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto fx = sewerml::fixture::write_catchment_fixture(dir, opts);
    for (std::size_t i = 0; i < fx.ids.size(); ++i)
      std::cout << fx.ids[i] << " " << fx.archetype_names[static_cast<std::size_t>(fx.archetype[i])] << "\n";
  } catch (const sewerml::Error& e) {
    std::cerr << e.what() << "\n";
    return sewerml::exit_status(e.code());
  }
  return 0;
}
