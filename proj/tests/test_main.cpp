#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "lq/log.hpp"

int main(int argc, char** argv) {
  lq::set_log_level(lq::LogLevel::kQuiet);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
