#!/usr/bin/env node
/** Usage: segfuse-plots gates <gates.csv> <out.svg>
 *         segfuse-plots training <history.csv> <out.svg> */

import { plotGateDynamics, plotTraining } from "./plots";

function usage(): never {
  console.error("usage: segfuse-plots gates <gates.csv> <out.svg>");
  console.error("       segfuse-plots training <history.csv> <out.svg>");
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv.length !== 3) {
    usage();
  }
  const [command, input, output] = argv;
  try {
    if (command === "gates") {
      plotGateDynamics(input, output);
    } else if (command === "training") {
      plotTraining(input, output);
    } else {
      usage();
    }
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
  console.log(output);
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
