int hour = timePicker.getCurrentHour();
int start = startPicker.getCurrentHour();
