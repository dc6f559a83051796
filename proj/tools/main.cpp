#include "app.hpp"

int main(int argc, char** argv) { return flipchance::app::run(argc, argv); }
