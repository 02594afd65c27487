#include "hl_lab.h"
#include <stdio.h>
int main(void){
  HlField *f=NULL; HlStatus s=hl_field_gaussian(8.0,800,0.0,1.0,&f);
  double m,d; hl_field_observables(f,0.3,&m,&d,NULL,NULL);
  printf("%s %d %.6f %.6f\n",hl_version(),s,m,d); hl_field_free(f);
  s=hl_field_uniform(4.0,7,-0.5,0.5,&f); char buf[256]; hl_last_error_message(buf,256);
  printf("%d %s\n",s,buf); return 0;}
